//! Cooperative client threads. Each thread owns its guest state and program
//! counter; memory and shadow memory are shared. A seeded generator picks
//! the next runnable thread, which then executes exactly one superblock.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::Program;

use super::{Fault, Machine, MachineState, GUEST_BAND};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thread {
    pub guest: Vec<u8>,
    pub pc: u64,
    pub halted: bool,
}

impl Thread {
    pub fn new(pc: u64) -> Self {
        Thread { guest: vec![0; 3 * GUEST_BAND as usize], pc, halted: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ThreadSet {
    pub threads: Vec<Thread>,
}

impl ThreadSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn spawn(&mut self, thread: Thread) -> usize {
        self.threads.push(thread);
        self.threads.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadRun {
    /// Thread id of every executed quantum, in order.
    pub schedule: Vec<usize>,
}

/// Runs all threads to completion over the shared memory in `state`.
/// `fuel` bounds the total number of quanta.
pub fn run_threads(
    machine: &Machine,
    program: &Program,
    state: &mut MachineState,
    threads: &mut ThreadSet,
    seed: u64,
    fuel: u64,
) -> Result<ThreadRun, Fault> {
    assert!(!threads.threads.is_empty(), "run_threads needs at least one thread");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut schedule = Vec::new();
    loop {
        let runnable: Vec<usize> = (0..threads.threads.len()).filter(|&i| !threads.threads[i].halted).collect();
        if runnable.is_empty() {
            state.halted = true;
            return Ok(ThreadRun { schedule });
        }
        if schedule.len() as u64 >= fuel {
            return Err(Fault::FuelExhausted(fuel));
        }
        let id = runnable[rng.gen_range(0..runnable.len())];
        let t = &mut threads.threads[id];
        std::mem::swap(&mut state.guest, &mut t.guest);
        state.pc = t.pc;
        state.halted = false;
        let r = machine.run_block(program, state);
        std::mem::swap(&mut state.guest, &mut t.guest);
        t.pc = state.pc;
        t.halted = state.halted;
        r?;
        schedule.push(id);
    }
}

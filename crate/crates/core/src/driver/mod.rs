//! Running, checking and inspecting programs: engine runs, the dual-number
//! and finite-difference oracles, the monitor, and the Burgers benchmark.

pub mod bench;
pub mod diff;
pub mod dual;
pub mod fd;
pub mod monitor;
pub mod run;
pub mod source;

pub use dual::{oracle_eval, oracle_eval_typed, DualValue, OracleError, OracleOutput, OracleRun};
pub use fd::{finite_diff, finite_diff_program, rel_err};
pub use run::{engine_machine, run, Bits, Output, RunOptions, RunReport};
pub use monitor::MonitorSession;
pub use bench::{bench_burgers, burgers_source, BenchError, BenchReport, BenchmarkConfig};
pub use diff::{diff_compiled, diff_source, to_tsv, DiffRow};
pub use source::{header_defaults, load, parse_inputs, HeaderDefaults, LoadError, Loaded};

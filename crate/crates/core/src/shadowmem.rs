//! Sparse byte store over the full 64-bit address space.
//!
//! Addresses split 21/21/22 bits. The first two levels are sparse maps, the
//! last 22 bits select one of 1024 4 KiB pages and the byte within it.
//! Pages are allocated on first write and never freed. Unwritten bytes read
//! as 0x00, which for shadow memory is the dot value +0.0.

use std::collections::HashMap;

pub const PAGE_SIZE: usize = 4096;
const PAGES_PER_LEAF: usize = 1024;

type Page = Box<[u8; PAGE_SIZE]>;

struct Leaf {
    pages: Vec<Option<Page>>,
}

impl Leaf {
    fn new() -> Self {
        Leaf { pages: (0..PAGES_PER_LEAF).map(|_| None).collect() }
    }
}

#[derive(Default)]
pub struct ShadowMap {
    root: HashMap<u32, HashMap<u32, Leaf>>,
    pages: usize,
    nodes: usize,
    bytes_written: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShadowStats {
    pub pages: usize,
    /// Interior nodes: second-level maps plus leaf page tables.
    pub nodes: usize,
    pub bytes_written: u64,
}

fn split(addr: u64) -> (u32, u32, usize, usize) {
    let top = (addr >> 43) as u32;
    let mid = ((addr >> 22) & 0x1f_ffff) as u32;
    let page = ((addr >> 12) & 0x3ff) as usize;
    let off = (addr & 0xfff) as usize;
    (top, mid, page, off)
}

impl ShadowMap {
    pub fn new() -> Self {
        Self::default()
    }

    fn page(&self, addr: u64) -> Option<&[u8; PAGE_SIZE]> {
        let (top, mid, page, _) = split(addr);
        self.root.get(&top)?.get(&mid)?.pages[page].as_deref()
    }

    fn page_mut(&mut self, addr: u64) -> &mut [u8; PAGE_SIZE] {
        let (top, mid, page, _) = split(addr);
        let level2 = self.root.entry(top).or_insert_with(|| {
            self.nodes += 1;
            HashMap::new()
        });
        let leaf = level2.entry(mid).or_insert_with(|| {
            self.nodes += 1;
            Leaf::new()
        });
        leaf.pages[page].get_or_insert_with(|| {
            self.pages += 1;
            Box::new([0u8; PAGE_SIZE])
        })
    }

    /// Fills `out` with the bytes at `addr..addr+out.len()`, wrapping at the
    /// top of the address space.
    pub fn read_into(&self, addr: u64, out: &mut [u8]) {
        let mut done = 0;
        while done < out.len() {
            let a = addr.wrapping_add(done as u64);
            let off = (a & 0xfff) as usize;
            let n = (PAGE_SIZE - off).min(out.len() - done);
            match self.page(a) {
                Some(p) => out[done..done + n].copy_from_slice(&p[off..off + n]),
                None => out[done..done + n].fill(0),
            }
            done += n;
        }
    }

    pub fn read(&self, addr: u64, len: usize) -> Vec<u8> {
        let mut out = vec![0u8; len];
        self.read_into(addr, &mut out);
        out
    }

    pub fn write(&mut self, addr: u64, bytes: &[u8]) {
        let mut done = 0;
        while done < bytes.len() {
            let a = addr.wrapping_add(done as u64);
            let off = (a & 0xfff) as usize;
            let n = (PAGE_SIZE - off).min(bytes.len() - done);
            self.page_mut(a)[off..off + n].copy_from_slice(&bytes[done..done + n]);
            done += n;
        }
        self.bytes_written += bytes.len() as u64;
    }

    /// Little-endian read of up to 16 bytes.
    pub fn read_uint(&self, addr: u64, len: usize) -> u128 {
        let mut buf = [0u8; 16];
        self.read_into(addr, &mut buf[..len]);
        u128::from_le_bytes(buf)
    }

    pub fn write_uint(&mut self, addr: u64, len: usize, value: u128) {
        self.write(addr, &value.to_le_bytes()[..len]);
    }

    pub fn stats(&self) -> ShadowStats {
        ShadowStats { pages: self.pages, nodes: self.nodes, bytes_written: self.bytes_written }
    }

    /// Base addresses of all allocated pages, in ascending order.
    pub fn page_addresses(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.pages);
        for (top, level2) in &self.root {
            for (mid, leaf) in level2 {
                for (i, p) in leaf.pages.iter().enumerate() {
                    if p.is_some() {
                        out.push(((*top as u64) << 43) | ((*mid as u64) << 22) | ((i as u64) << 12));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

impl Clone for ShadowMap {
    fn clone(&self) -> Self {
        let root = self
            .root
            .iter()
            .map(|(k, level2)| {
                let level2 = level2
                    .iter()
                    .map(|(m, leaf)| (*m, Leaf { pages: leaf.pages.clone() }))
                    .collect();
                (*k, level2)
            })
            .collect();
        ShadowMap { root, pages: self.pages, nodes: self.nodes, bytes_written: self.bytes_written }
    }
}

impl std::fmt::Debug for ShadowMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShadowMap").field("stats", &self.stats()).finish()
    }
}

impl PartialEq for ShadowMap {
    /// Content equality: maps are equal when every address reads the same.
    fn eq(&self, other: &Self) -> bool {
        let mut pages = self.page_addresses();
        pages.extend(other.page_addresses());
        pages.dedup();
        pages.iter().all(|&p| {
            let zero = [0u8; PAGE_SIZE];
            self.page(p).unwrap_or(&zero) == other.page(p).unwrap_or(&zero)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_map_reads_zero() {
        let m = ShadowMap::new();
        assert_eq!(m.read(0x1000, 8), vec![0; 8]);
        assert_eq!(f64::from_bits(m.read_uint(0x1000, 8) as u64), 0.0);
        assert_eq!(m.stats().pages, 0);
    }

    #[test]
    fn read_your_write() {
        let mut m = ShadowMap::new();
        m.write(0x1000, &[0xaa]);
        assert_eq!(m.read(0x1000, 1), vec![0xaa]);
        m.write(0xdead_beef_0123, &1.5f64.to_bits().to_le_bytes());
        assert_eq!(m.read_uint(0xdead_beef_0123, 8) as u64, 1.5f64.to_bits());
    }

    #[test]
    fn straddling_read_fills_unwritten_page_with_zero() {
        let mut m = ShadowMap::new();
        m.write(0x1ffc, &[1, 2, 3, 4]);
        assert_eq!(m.read(0x1ffc, 8), vec![1, 2, 3, 4, 0, 0, 0, 0]);
        assert_eq!(m.stats().pages, 1);
    }

    #[test]
    fn disjoint_pages_allocate_two_leaves() {
        let mut m = ShadowMap::new();
        m.write(0x1000, &[1]);
        m.write(0x7fff_0000_0000, &[2]);
        assert_eq!(m.stats().pages, 2);
        assert_eq!(m.page_addresses(), vec![0x1000, 0x7fff_0000_0000]);
    }

    #[test]
    fn later_write_wins() {
        let mut m = ShadowMap::new();
        m.write(0x10, &[1, 1, 1, 1]);
        m.write(0x12, &[9, 9]);
        assert_eq!(m.read(0x10, 4), vec![1, 1, 9, 9]);
    }

    #[test]
    fn top_of_address_space() {
        let mut m = ShadowMap::new();
        m.write(u64::MAX - 1, &[7, 8, 9]);
        assert_eq!(m.read(u64::MAX - 1, 2), vec![7, 8]);
        assert_eq!(m.read(0, 1), vec![9]);
    }

    #[test]
    fn equality_ignores_explicit_zero_pages() {
        let mut a = ShadowMap::new();
        a.write(0x5000, &[0; 8]);
        assert_eq!(a, ShadowMap::new());
        a.write(0x5000, &[1]);
        assert_ne!(a, ShadowMap::new());
    }
}

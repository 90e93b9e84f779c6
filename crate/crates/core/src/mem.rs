//! L1 instruction/data caches over a flat, sparsely backed main memory.
//!
//! Caches track tags only; values always live in [`Memory`], which both
//! the timed and the untimed executors share. A cache access therefore only
//! produces a latency and updates counters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemError {
    #[error("address {addr:#x} out of range (memory is {size:#x} bytes)")]
    OutOfRange { addr: u64, size: u64 },
    #[error("misaligned {size}-byte access at {addr:#x}")]
    Misaligned { addr: u64, size: usize },
    #[error("unsupported access size {0}")]
    BadSize(usize),
    #[error("invalid memory configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    pub size_bytes: u64,
    pub associativity: u32,
    pub line_bytes: u32,
    pub hit_latency: u32,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            size_bytes: 512 * 1024,
            associativity: 2,
            line_bytes: 64,
            hit_latency: 2,
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<(), MemError> {
        let pow2 = |v: u64| v != 0 && v.is_power_of_two();
        if !pow2(self.size_bytes) || !pow2(self.associativity as u64) || !pow2(self.line_bytes as u64)
        {
            return Err(MemError::Config(format!(
                "cache size, associativity and line size must be powers of two: {self:?}"
            )));
        }
        if self.line_bytes < 8 {
            return Err(MemError::Config("cache line must hold at least 8 bytes".into()));
        }
        let way_bytes = self.associativity as u64 * self.line_bytes as u64;
        if self.size_bytes % way_bytes != 0 || self.size_bytes < way_bytes {
            return Err(MemError::Config(format!(
                "size {} not divisible by associativity x line ({way_bytes})",
                self.size_bytes
            )));
        }
        if self.hit_latency == 0 || !self.hit_latency.is_power_of_two() {
            return Err(MemError::Config("hit latency must be a power of two >= 1".into()));
        }
        Ok(())
    }

    pub fn sets(&self) -> u64 {
        self.size_bytes / (self.associativity as u64 * self.line_bytes as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MainMemoryConfig {
    pub latency_cycles: u32,
    pub size_bytes: u64,
}

impl Default for MainMemoryConfig {
    fn default() -> Self {
        MainMemoryConfig {
            latency_cycles: 80,
            size_bytes: 2 << 30,
        }
    }
}

impl MainMemoryConfig {
    pub fn validate(&self) -> Result<(), MemError> {
        if self.latency_cycles < 1 {
            return Err(MemError::Config("memory latency must be >= 1".into()));
        }
        if self.size_bytes == 0 || self.size_bytes % PAGE_BYTES as u64 != 0 {
            return Err(MemError::Config(format!(
                "memory size must be a non-zero multiple of {PAGE_BYTES}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CacheStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
}

impl std::ops::AddAssign for CacheStats {
    fn add_assign(&mut self, rhs: Self) {
        self.accesses += rhs.accesses;
        self.hits += rhs.hits;
        self.misses += rhs.misses;
        self.writebacks += rhs.writebacks;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Ifetch,
    Load,
    Store,
}

#[derive(Debug, Clone, Copy, Default)]
struct Line {
    tag: u64,
    valid: bool,
    dirty: bool,
}

/// Set-associative, write-back, write-allocate cache with true LRU.
///
/// Each set is stored most-recently-used first.
#[derive(Debug, Clone)]
pub struct Cache {
    config: CacheConfig,
    lines: Vec<Line>,
    ways: usize,
    line_shift: u32,
    set_mask: u64,
    stats: CacheStats,
}

impl Cache {
    pub fn new(config: CacheConfig) -> Result<Self, MemError> {
        config.validate()?;
        let sets = config.sets();
        Ok(Cache {
            config,
            lines: vec![Line::default(); (sets * config.associativity as u64) as usize],
            ways: config.associativity as usize,
            line_shift: config.line_bytes.trailing_zeros(),
            set_mask: sets - 1,
            stats: CacheStats::default(),
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    fn locate(&self, addr: u64) -> (usize, u64) {
        let line = addr >> self.line_shift;
        let set = (line & self.set_mask) as usize;
        (set * self.ways, line >> self.set_mask.count_ones())
    }

    /// Look up `addr`, updating LRU order and counters. Returns the access
    /// latency: the hit latency, plus one memory latency on a miss, plus one
    /// more if the victim was dirty.
    pub fn access(&mut self, addr: u64, kind: AccessKind, memory_latency: u32) -> u32 {
        self.stats.accesses += 1;
        let (base, tag) = self.locate(addr);
        let set = &mut self.lines[base..base + self.ways];
        let is_store = kind == AccessKind::Store;

        if let Some(way) = set.iter().position(|l| l.valid && l.tag == tag) {
            set[..=way].rotate_right(1);
            set[0].dirty |= is_store;
            self.stats.hits += 1;
            return self.config.hit_latency;
        }

        self.stats.misses += 1;
        let victim = set[self.ways - 1];
        let mut latency = self.config.hit_latency + memory_latency;
        if victim.valid && victim.dirty {
            self.stats.writebacks += 1;
            latency += memory_latency;
        }
        set.rotate_right(1);
        set[0] = Line {
            tag,
            valid: true,
            dirty: is_store,
        };
        latency
    }

    /// Install the line holding `addr` without touching the counters.
    pub fn prefill(&mut self, addr: u64) {
        let (base, tag) = self.locate(addr);
        let set = &mut self.lines[base..base + self.ways];
        match set.iter().position(|l| l.valid && l.tag == tag) {
            Some(way) => set[..=way].rotate_right(1),
            None => {
                set.rotate_right(1);
                set[0] = Line {
                    tag,
                    valid: true,
                    dirty: false,
                };
            }
        }
    }

    pub fn reset_stats(&mut self) {
        self.stats = CacheStats::default();
    }
}

const PAGE_BYTES: usize = 4096;
const PAGES_PER_DIR: usize = 1024;
type Page = Box<[u8; PAGE_BYTES]>;

/// Sparse little-endian byte-addressed memory. Untouched bytes read as 0.
#[derive(Debug, Clone)]
pub struct Memory {
    size: u64,
    dirs: Vec<Option<Box<[Option<Page>]>>>,
}

impl Memory {
    pub fn new(size_bytes: u64) -> Self {
        let pages = size_bytes.div_ceil(PAGE_BYTES as u64) as usize;
        Memory {
            size: size_bytes,
            dirs: vec![None; pages.div_ceil(PAGES_PER_DIR)],
        }
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    fn check(&self, addr: u64, n: usize) -> Result<(), MemError> {
        if !matches!(n, 1 | 2 | 4 | 8) {
            return Err(MemError::BadSize(n));
        }
        if addr.checked_add(n as u64).is_none_or(|end| end > self.size) {
            return Err(MemError::OutOfRange {
                addr,
                size: self.size,
            });
        }
        if addr % n as u64 != 0 {
            return Err(MemError::Misaligned { addr, size: n });
        }
        Ok(())
    }

    fn page(&self, addr: u64) -> Option<&[u8; PAGE_BYTES]> {
        let page = (addr / PAGE_BYTES as u64) as usize;
        self.dirs[page / PAGES_PER_DIR].as_ref()?[page % PAGES_PER_DIR].as_deref()
    }

    fn page_mut(&mut self, addr: u64) -> &mut [u8; PAGE_BYTES] {
        let page = (addr / PAGE_BYTES as u64) as usize;
        let dir = self.dirs[page / PAGES_PER_DIR]
            .get_or_insert_with(|| vec![None; PAGES_PER_DIR].into_boxed_slice());
        dir[page % PAGES_PER_DIR].get_or_insert_with(|| Box::new([0; PAGE_BYTES]))
    }

    /// Naturally aligned little-endian read of `n` ∈ {1, 2, 4, 8} bytes,
    /// zero-extended.
    pub fn read_bytes(&self, addr: u64, n: usize) -> Result<u64, MemError> {
        self.check(addr, n)?;
        let Some(page) = self.page(addr) else {
            return Ok(0);
        };
        let off = (addr % PAGE_BYTES as u64) as usize;
        let mut buf = [0u8; 8];
        buf[..n].copy_from_slice(&page[off..off + n]);
        Ok(u64::from_le_bytes(buf))
    }

    /// Naturally aligned little-endian write; `bytes.len()` ∈ {1, 2, 4, 8}.
    pub fn write_bytes(&mut self, addr: u64, bytes: &[u8]) -> Result<(), MemError> {
        self.check(addr, bytes.len())?;
        let off = (addr % PAGE_BYTES as u64) as usize;
        self.page_mut(addr)[off..off + bytes.len()].copy_from_slice(bytes);
        Ok(())
    }

    pub fn read_u32(&self, addr: u64) -> Result<u32, MemError> {
        self.read_bytes(addr, 4).map(|v| v as u32)
    }

    pub fn read_u64(&self, addr: u64) -> Result<u64, MemError> {
        self.read_bytes(addr, 8)
    }

    pub fn write_u32(&mut self, addr: u64, value: u32) -> Result<(), MemError> {
        self.write_bytes(addr, &value.to_le_bytes())
    }

    pub fn write_u64(&mut self, addr: u64, value: u64) -> Result<(), MemError> {
        self.write_bytes(addr, &value.to_le_bytes())
    }

    /// Bulk copy of an arbitrary byte run (no alignment requirement).
    pub fn load_segment(&mut self, addr: u64, data: &[u8]) -> Result<(), MemError> {
        if addr.checked_add(data.len() as u64).is_none_or(|end| end > self.size) {
            return Err(MemError::OutOfRange {
                addr,
                size: self.size,
            });
        }
        let mut cursor = addr;
        let mut rest = data;
        while !rest.is_empty() {
            let off = (cursor % PAGE_BYTES as u64) as usize;
            let take = rest.len().min(PAGE_BYTES - off);
            self.page_mut(cursor)[off..off + take].copy_from_slice(&rest[..take]);
            cursor += take as u64;
            rest = &rest[take..];
        }
        Ok(())
    }

    pub fn read_f32_slice(&self, addr: u64, len: usize) -> Result<Vec<u32>, MemError> {
        (0..len).map(|i| self.read_u32(addr + 4 * i as u64)).collect()
    }

    fn pages(&self) -> impl Iterator<Item = (usize, &[u8; PAGE_BYTES])> {
        self.dirs.iter().enumerate().flat_map(|(d, dir)| {
            dir.iter().flat_map(move |pages| {
                pages
                    .iter()
                    .enumerate()
                    .filter_map(move |(p, page)| page.as_deref().map(|pg| (d * PAGES_PER_DIR + p, pg)))
            })
        })
    }
}

impl PartialEq for Memory {
    /// Content equality; a never-touched page equals an all-zero page.
    fn eq(&self, other: &Self) -> bool {
        if self.size != other.size {
            return false;
        }
        let covered = |a: &Memory, b: &Memory| {
            a.pages().all(|(idx, page)| {
                let addr = (idx * PAGE_BYTES) as u64;
                match b.page(addr) {
                    Some(theirs) => page == theirs,
                    None => page.iter().all(|&byte| byte == 0),
                }
            })
        };
        covered(self, other) && covered(other, self)
    }
}

/// Split L1 caches in front of one fixed-latency main memory.
#[derive(Debug, Clone)]
pub struct MemHier {
    pub l1i: Cache,
    pub l1d: Cache,
    pub memory_config: MainMemoryConfig,
}

impl MemHier {
    pub fn new(
        l1i: CacheConfig,
        l1d: CacheConfig,
        memory_config: MainMemoryConfig,
    ) -> Result<Self, MemError> {
        memory_config.validate()?;
        Ok(MemHier {
            l1i: Cache::new(l1i)?,
            l1d: Cache::new(l1d)?,
            memory_config,
        })
    }

    pub fn access(&mut self, addr: u64, kind: AccessKind) -> Result<u32, MemError> {
        if addr >= self.memory_config.size_bytes {
            return Err(MemError::OutOfRange {
                addr,
                size: self.memory_config.size_bytes,
            });
        }
        let latency = self.memory_config.latency_cycles;
        Ok(match kind {
            AccessKind::Ifetch => self.l1i.access(addr, kind, latency),
            AccessKind::Load | AccessKind::Store => self.l1d.access(addr, kind, latency),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(ways: u32) -> Cache {
        Cache::new(CacheConfig {
            size_bytes: 1024,
            associativity: ways,
            line_bytes: 64,
            hit_latency: 2,
        })
        .unwrap()
    }

    #[test]
    fn cold_miss_then_hit() {
        let mut c = Cache::new(CacheConfig::default()).unwrap();
        assert_eq!(c.access(0x4000, AccessKind::Load, 80), 82);
        assert_eq!(c.access(0x4000, AccessKind::Load, 80), 2);
        assert_eq!(c.access(0x403C, AccessKind::Load, 80), 2);
        let s = c.stats();
        assert_eq!((s.accesses, s.hits, s.misses), (3, 2, 1));
    }

    #[test]
    fn lru_thrash_three_lines_two_ways() {
        // 1 KiB, 2-way, 64 B lines -> 8 sets; stride 512 B maps to one set.
        let mut c = small(2);
        let lines = [0x0, 0x200, 0x400];
        // Hand-enumerated LRU state (MRU first):
        // A:[A] B:[B,A] C:[C,B] A:[A,C] B:[B,A] C:[C,B] ... all misses.
        for _ in 0..4 {
            for &a in &lines {
                assert!(c.access(a, AccessKind::Load, 80) > 2, "{a:#x} should miss");
            }
        }
        let s = c.stats();
        assert_eq!(s.misses, 12);
        assert_eq!(s.hits, 0);
        assert_eq!(s.hits + s.misses, s.accesses);
    }

    #[test]
    fn lru_keeps_recent_line() {
        let mut c = small(2);
        c.access(0x0, AccessKind::Load, 80);
        c.access(0x200, AccessKind::Load, 80);
        c.access(0x0, AccessKind::Load, 80); // A becomes MRU
        c.access(0x400, AccessKind::Load, 80); // evicts 0x200
        assert_eq!(c.access(0x0, AccessKind::Load, 80), 2);
        assert!(c.access(0x200, AccessKind::Load, 80) > 2);
    }

    #[test]
    fn dirty_victim_costs_writeback() {
        let mut c = small(1);
        assert_eq!(c.access(0x0, AccessKind::Store, 80), 82);
        assert_eq!(c.access(0x400, AccessKind::Load, 80), 162);
        assert_eq!(c.stats().writebacks, 1);
        assert_eq!(c.access(0x0, AccessKind::Load, 80), 82);
        assert_eq!(c.stats().writebacks, 1);
    }

    #[test]
    fn prefill_is_silent() {
        let mut c = small(2);
        c.prefill(0x40);
        assert_eq!(c.stats(), CacheStats::default());
        assert_eq!(c.access(0x40, AccessKind::Ifetch, 80), 2);
    }

    #[test]
    fn config_validation() {
        assert!(CacheConfig::default().validate().is_ok());
        let bad = CacheConfig {
            size_bytes: 3000,
            ..CacheConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = CacheConfig {
            associativity: 3,
            ..CacheConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MainMemoryConfig {
            latency_cycles: 0,
            ..MainMemoryConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn memory_roundtrips_and_alignment() {
        let mut m = Memory::new(MainMemoryConfig::default().size_bytes);
        m.write_u32(0x100, 0x3F80_0000).unwrap();
        assert_eq!(f32::from_bits(m.read_u32(0x100).unwrap()), 1.0);
        m.write_u64(0x208, 0x0123_4567_89AB_CDEF).unwrap();
        assert_eq!(m.read_u64(0x208).unwrap(), 0x0123_4567_89AB_CDEF);
        assert_eq!(m.read_u32(0x20C).unwrap(), 0x0123_4567);
        assert_eq!(m.read_u32(0x9000).unwrap(), 0);
        assert_eq!(
            m.read_u32(0x102),
            Err(MemError::Misaligned { addr: 0x102, size: 4 })
        );
        assert!(matches!(m.write_u32(2 << 30, 0), Err(MemError::OutOfRange { .. })));
        assert!(matches!(m.read_bytes(0, 3), Err(MemError::BadSize(3))));
    }

    #[test]
    fn memory_equality_ignores_zero_pages() {
        let mut a = Memory::new(1 << 20);
        let mut b = Memory::new(1 << 20);
        a.write_u32(0x5000, 0).unwrap();
        assert_eq!(a, b);
        b.load_segment(0xFFE, &[1, 2, 3, 4]).unwrap();
        assert_ne!(a, b);
        a.write_bytes(0xFFE, &[1, 2]).unwrap();
        a.write_bytes(0x1000, &[3, 4]).unwrap();
        assert_eq!(a, b);
    }
}

//! Cycle-accurate five-stage in-order pipeline (IF, ID, EX, MEM, WB).
//!
//! Timing rules:
//!
//! * EX operands are bypassed from the instruction that occupied MEM this
//!   cycle; older results are already in the register file (WB writes in the
//!   first half of the cycle).
//! * Load-use: a consumer in ID stalls one cycle behind a load in EX.
//! * `fmul.s` products reach the bypass network one cycle late, so an
//!   immediate consumer stalls one cycle, like a load.
//! * `rfmac.s` multiplies in EX and accumulates into the APR in MEM (the
//!   rented R_EX stage) without touching the data cache. The APR lives
//!   beside the MEM/WB latch, so back-to-back accumulations never stall.
//! * `rfsmac.s` reads the APR in ID and zeroes it in MEM. It stalls in ID
//!   while an `rfmac.s` is in EX or MEM. An older `rfsmac.s` still in EX
//!   makes the read return +0.0.
//! * Branches and jumps resolve in EX. Fetch predicts not-taken; a redirect
//!   squashes the two younger instructions.
//! * Loads and stores hold MEM for the cache latency (one cycle plus
//!   `latency - 1` stall cycles). I-cache hits are pipelined; a miss holds
//!   fetch for `latency - hit_latency` cycles.
//! * Decoding `ebreak` stops fetch; the run ends when it retires.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::asm::ProgramImage;
use crate::fpu;
use crate::isa::{DecodedInstruction, IsaError, Mnemonic, RegClass, RegRef};
use crate::machine::{
    access_size, execute, fetch_word, load_program, memory_access, DataSegment, ExecOutcome,
    MachineState, MnemonicCounts, Predecoded, SimError,
};
use crate::mem::{AccessKind, CacheConfig, CacheStats, MainMemoryConfig, MemHier, Memory};

pub const STAGE_NAMES: [&str; 5] = ["IF", "ID", "EX", "MEM", "WB"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub l1i: CacheConfig,
    pub l1d: CacheConfig,
    pub memory: MainMemoryConfig,
    pub max_cycles: u64,
    #[serde(default)]
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            l1i: CacheConfig::default(),
            l1d: CacheConfig::default(),
            memory: MainMemoryConfig::default(),
            max_cycles: 1 << 40,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StallCause {
    LoadUse,
    MulUse,
    AprInterlock,
    DataCache,
    InstCache,
}

impl StallCause {
    fn label(self) -> &'static str {
        match self {
            StallCause::LoadUse => "load-use",
            StallCause::MulUse => "mul-use",
            StallCause::AprInterlock => "apr",
            StallCause::DataCache => "dcache",
            StallCause::InstCache => "icache",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub cycles: u64,
    /// Instruction count (IC).
    pub retired: u64,
    pub mem_type_retired: u64,
    pub stalls_load_use: u64,
    pub stalls_mul_use: u64,
    pub stalls_apr_interlock: u64,
    /// Cycles lost waiting on either L1 (data-side MEM stalls plus fetch
    /// starvation on I-cache misses).
    pub stalls_cache: u64,
    pub flushes_branch: u64,
    pub fetches: u64,
    pub l1i: CacheStats,
    pub l1d: CacheStats,
    pub retired_by_mnemonic: MnemonicCounts,
}

impl RunStats {
    pub fn ipc(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.retired as f64 / self.cycles as f64
        }
    }

    pub fn l1_overall(&self) -> u64 {
        self.l1i.accesses + self.l1d.accesses
    }

    pub fn accumulate(&mut self, other: &RunStats) {
        self.cycles += other.cycles;
        self.retired += other.retired;
        self.mem_type_retired += other.mem_type_retired;
        self.stalls_load_use += other.stalls_load_use;
        self.stalls_mul_use += other.stalls_mul_use;
        self.stalls_apr_interlock += other.stalls_apr_interlock;
        self.stalls_cache += other.stalls_cache;
        self.flushes_branch += other.flushes_branch;
        self.fetches += other.fetches;
        self.l1i += other.l1i;
        self.l1d += other.l1d;
        self.retired_by_mnemonic.merge(&other.retired_by_mnemonic);
    }
}

/// Contents of the IF/ID latch: a fetched word, decoded lazily in ID.
#[derive(Debug, Clone, PartialEq)]
pub struct Fetched {
    pub pc: u64,
    pub word: u32,
    pub decoded: Result<DecodedInstruction, IsaError>,
    /// Fetch fell outside memory; faults if it reaches ID unsquashed.
    pub fault: bool,
}

impl Fetched {
    fn is_ebreak(&self) -> bool {
        matches!(&self.decoded, Ok(d) if d.mnemonic == Mnemonic::Ebreak)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Control {
    pub is_load: bool,
    pub is_store: bool,
    pub is_rfmac: bool,
    pub is_rfsmac: bool,
    /// Result reaches the bypass network one cycle after EX (loads, fmul.s).
    pub late_result: bool,
    pub writes_apr: bool,
    pub resets_apr: bool,
}

impl Control {
    fn for_instr(d: &DecodedInstruction) -> Self {
        let m = d.mnemonic;
        Control {
            is_load: m.is_load(),
            is_store: m.is_store(),
            is_rfmac: m == Mnemonic::RfmacS,
            is_rfsmac: m == Mnemonic::RfsmacS,
            late_result: m.is_load() || m == Mnemonic::FmulS,
            writes_apr: m == Mnemonic::RfmacS,
            resets_apr: m == Mnemonic::RfsmacS,
        }
    }
}

/// An instruction in the ID/EX, EX/MEM or MEM/WB latch.
#[derive(Debug, Clone, PartialEq)]
pub struct InFlight {
    pub pc: u64,
    pub instr: DecodedInstruction,
    pub ctrl: Control,
    pub operands: [u64; 3],
    pub outcome: ExecOutcome,
    /// Value written to `rd` at WB.
    pub result: u64,
    mem_cycles_left: u32,
    mem_started: bool,
}

impl InFlight {
    fn writes(&self, r: RegRef) -> bool {
        match self.instr.dest() {
            Some(d) => d == r && !(r.class == RegClass::X && r.index == 0),
            None => false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineLatches {
    pub if_id: Option<Fetched>,
    pub id_ex: Option<InFlight>,
    pub ex_mem: Option<InFlight>,
    pub mem_wb: Option<InFlight>,
}

#[derive(Debug, Clone, Default)]
struct FetchUnit {
    pending: Option<Fetched>,
    wait: u32,
    stopped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetireEvent {
    pub pc: u64,
    pub mnemonic: Mnemonic,
    /// APR raw bits at the moment the instruction completed WB.
    pub apr: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CycleEvents {
    pub cycle: u64,
    pub retired: Option<RetireEvent>,
    pub stall: Option<StallCause>,
    pub flush: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedRun {
    pub state: MachineState,
    pub memory: Memory,
    pub stats: RunStats,
    pub trace: Option<Vec<String>>,
}

pub struct Pipeline {
    state: MachineState,
    memory: Memory,
    hier: MemHier,
    latches: PipelineLatches,
    fetch: FetchUnit,
    program: Predecoded,
    stats: RunStats,
    max_cycles: u64,
    trace: Option<Vec<String>>,
}

fn slot_label(pc: u64, m: Option<Mnemonic>) -> String {
    match m {
        Some(m) => format!("{pc:x} {m}"),
        None => format!("{pc:x} ???"),
    }
}

impl Pipeline {
    pub fn new(
        image: &ProgramImage,
        data: &[DataSegment],
        config: &SimConfig,
    ) -> Result<Self, SimError> {
        let hier = MemHier::new(config.l1i, config.l1d, config.memory)
            .map_err(|e| SimError::Config(e.to_string()))?;
        let memory = load_program(image, data, config.memory.size_bytes)?;
        Ok(Pipeline {
            state: MachineState::reset(image.base),
            memory,
            hier,
            latches: PipelineLatches::default(),
            fetch: FetchUnit::default(),
            program: Predecoded::new(image),
            stats: RunStats::default(),
            max_cycles: config.max_cycles,
            trace: config.trace.then(Vec::new),
        })
    }

    /// Install every line of `image` in the I-cache without counting.
    pub fn warm_icache(&mut self, image: &ProgramImage) {
        for addr in (image.base..image.end()).step_by(4) {
            self.hier.l1i.prefill(addr);
        }
    }

    /// Install the lines covering `[addr, addr + len)` in the D-cache.
    pub fn warm_dcache(&mut self, addr: u64, len: u64) {
        for a in (addr..addr + len).step_by(4) {
            self.hier.l1d.prefill(a);
        }
    }

    pub fn state(&self) -> &MachineState {
        &self.state
    }

    pub fn latches(&self) -> &PipelineLatches {
        &self.latches
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    /// Remove and return the trace lines recorded so far.
    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn stats(&self) -> RunStats {
        let mut s = self.stats;
        s.l1i = self.hier.l1i.stats();
        s.l1d = self.hier.l1d.stats();
        s
    }

    /// Read a register as the instruction in EX sees it.
    fn bypass(&self, r: RegRef) -> u64 {
        if r.class == RegClass::X && r.index == 0 {
            return 0;
        }
        // mem_wb now holds what occupied MEM during this cycle.
        if let Some(p) = &self.latches.mem_wb {
            if p.writes(r) {
                debug_assert!(!p.ctrl.late_result, "late result bypassed at {:#x}", p.pc);
                return p.result;
            }
        }
        self.state.read(r)
    }

    /// Advance every stage by one clock.
    pub fn step(&mut self) -> Result<CycleEvents, SimError> {
        debug_assert!(!self.state.halted);
        self.stats.cycles += 1;
        let mut ev = CycleEvents {
            cycle: self.stats.cycles,
            ..CycleEvents::default()
        };
        let labels = self.trace.as_ref().map(|_| self.occupancy());

        // WB
        if let Some(done) = self.latches.mem_wb.take() {
            if let Some(rd) = done.instr.dest() {
                self.state.write(rd, done.result);
            }
            let m = done.instr.mnemonic;
            self.stats.retired += 1;
            self.stats.retired_by_mnemonic.bump(m);
            if m.is_mem_type() {
                self.stats.mem_type_retired += 1;
            }
            if m == Mnemonic::Ebreak {
                self.state.halted = true;
                self.state.pc = done.pc;
            }
            ev.retired = Some(RetireEvent {
                pc: done.pc,
                mnemonic: m,
                apr: self.state.apr,
            });
        }

        // MEM (or R_EX for the accumulator instructions)
        let mut mem_stall = false;
        if let Some(cur) = self.latches.ex_mem.as_mut() {
            if cur.ctrl.is_load || cur.ctrl.is_store {
                if !cur.mem_started {
                    let pc = cur.pc;
                    let fault = |source| SimError::Memory { pc, source };
                    let value = memory_access(&cur.instr, &cur.outcome, &mut self.memory)
                        .map_err(fault)?;
                    let kind = if cur.ctrl.is_load {
                        AccessKind::Load
                    } else {
                        AccessKind::Store
                    };
                    debug_assert_eq!(cur.outcome.addr % access_size(cur.instr.mnemonic) as u64, 0);
                    cur.mem_cycles_left = self.hier.access(cur.outcome.addr, kind).map_err(fault)?;
                    cur.mem_started = true;
                    if cur.ctrl.is_load {
                        cur.result = value;
                    }
                }
                cur.mem_cycles_left -= 1;
                mem_stall = cur.mem_cycles_left > 0;
            } else if cur.ctrl.writes_apr {
                self.state.apr = fpu::add(self.state.apr, cur.outcome.product);
            } else if cur.ctrl.resets_apr {
                self.state.apr = fpu::POS_ZERO;
            }
            if !mem_stall {
                self.latches.mem_wb = self.latches.ex_mem.take();
            }
        }

        let mut redirect = None;
        let mut fetched_now = None;
        if mem_stall {
            self.stats.stalls_cache += 1;
            ev.stall = Some(StallCause::DataCache);
        } else {
            // EX
            if let Some(mut cur) = self.latches.id_ex.take() {
                let mut ops = [0u64; 3];
                for (slot, src) in ops.iter_mut().zip(cur.instr.sources()) {
                    *slot = self.bypass(src);
                }
                cur.operands = ops;
                cur.outcome = execute(&cur.instr, cur.pc, ops);
                if !cur.ctrl.is_rfsmac {
                    cur.result = cur.outcome.value;
                }
                redirect = cur.outcome.redirect;
                self.latches.ex_mem = Some(cur);
            }

            // ID
            let id_was_empty = self.latches.if_id.is_none();
            if let Some(target) = redirect {
                self.latches.if_id = None;
                self.fetch.pending = None;
                self.fetch.wait = 0;
                self.state.pc = target;
                self.stats.flushes_branch += 1;
                ev.flush = true;
            } else if let Some(f) = &self.latches.if_id {
                if f.fault {
                    return Err(SimError::FetchFault(f.pc));
                }
                let d = f.decoded.clone().map_err(|source| SimError::IllegalInstruction {
                    pc: f.pc,
                    word: f.word,
                    source,
                })?;
                match self.hazard(&d) {
                    Some(cause) => {
                        match cause {
                            StallCause::LoadUse => self.stats.stalls_load_use += 1,
                            StallCause::MulUse => self.stats.stalls_mul_use += 1,
                            StallCause::AprInterlock => self.stats.stalls_apr_interlock += 1,
                            _ => unreachable!(),
                        }
                        ev.stall = Some(cause);
                    }
                    None => {
                        let ctrl = Control::for_instr(&d);
                        let mut result = 0;
                        if ctrl.is_rfsmac {
                            let older_reset = [&self.latches.ex_mem, &self.latches.mem_wb]
                                .iter()
                                .any(|s| s.as_ref().is_some_and(|s| s.ctrl.resets_apr));
                            result = if older_reset { fpu::POS_ZERO } else { self.state.apr } as u64;
                        }
                        if d.mnemonic == Mnemonic::Ebreak {
                            self.fetch.stopped = true;
                            self.fetch.pending = None;
                            self.fetch.wait = 0;
                        }
                        self.latches.id_ex = Some(InFlight {
                            pc: f.pc,
                            instr: d,
                            ctrl,
                            operands: [0; 3],
                            outcome: ExecOutcome::default(),
                            result,
                            mem_cycles_left: 0,
                            mem_started: false,
                        });
                        self.latches.if_id = None;
                    }
                }
            }

            // IF
            if redirect.is_none() {
                let starving = id_was_empty && self.fetch.wait > 0;
                fetched_now = self.advance_fetch()?;
                if starving && ev.stall.is_none() {
                    self.stats.stalls_cache += 1;
                    ev.stall = Some(StallCause::InstCache);
                }
            }
        }
        if mem_stall && self.fetch.wait > 0 {
            // A pending I-miss keeps being serviced under a data stall.
            self.fetch.wait -= 1;
        }

        if self.stats.cycles > self.max_cycles && !self.state.halted {
            return Err(SimError::MaxCycles(self.max_cycles));
        }
        if let Some(mut labels) = labels {
            labels[0] = fetched_now.or(labels[0].take());
            let line = self.trace_line(&ev, &labels);
            if let Some(t) = self.trace.as_mut() {
                t.push(line);
            }
        }
        Ok(ev)
    }

    /// Interlock check for `d` sitting in ID. Called after EX and MEM have
    /// moved on, so `ex_mem` holds this cycle's EX occupant and `mem_wb`
    /// this cycle's MEM occupant.
    fn hazard(&self, d: &DecodedInstruction) -> Option<StallCause> {
        if let Some(ex) = &self.latches.ex_mem {
            if ex.ctrl.late_result && d.sources().any(|r| ex.writes(r)) {
                return Some(if ex.ctrl.is_load {
                    StallCause::LoadUse
                } else {
                    StallCause::MulUse
                });
            }
        }
        if d.mnemonic == Mnemonic::RfsmacS {
            let rfmac_ahead = [&self.latches.ex_mem, &self.latches.mem_wb]
                .iter()
                .any(|s| s.as_ref().is_some_and(|s| s.ctrl.is_rfmac));
            if rfmac_ahead {
                return Some(StallCause::AprInterlock);
            }
        }
        None
    }

    /// Run the fetch unit for one cycle. Returns the trace label of the
    /// instruction occupying IF, if a fetch started this cycle.
    fn advance_fetch(&mut self) -> Result<Option<String>, SimError> {
        let mut label = None;
        let stop = self.fetch.stopped
            || self.latches.if_id.as_ref().is_some_and(Fetched::is_ebreak);
        if self.fetch.pending.is_none() && !stop {
            let pc = self.state.pc;
            let fetched = match fetch_word(&self.memory, pc) {
                Ok(word) => {
                    let latency = self
                        .hier
                        .access(pc, AccessKind::Ifetch)
                        .map_err(|_| SimError::FetchFault(pc))?;
                    self.fetch.wait = latency - self.hier.l1i.config().hit_latency;
                    Fetched {
                        pc,
                        word,
                        decoded: self.program.decode(pc, word),
                        fault: false,
                    }
                }
                Err(_) => Fetched {
                    pc,
                    word: 0,
                    decoded: Err(IsaError::IllegalInstruction(0)),
                    fault: true,
                },
            };
            self.stats.fetches += 1;
            if self.trace.is_some() {
                label = Some(slot_label(pc, fetched.decoded.as_ref().ok().map(|d| d.mnemonic)));
            }
            self.fetch.pending = Some(fetched);
            self.state.pc = pc.wrapping_add(4);
        } else if self.fetch.wait > 0 {
            self.fetch.wait -= 1;
        }
        if self.fetch.wait == 0 && self.latches.if_id.is_none() {
            self.latches.if_id = self.fetch.pending.take();
        }
        Ok(label)
    }

    fn occupancy(&self) -> [Option<String>; 5] {
        let infl = |s: &Option<InFlight>| s.as_ref().map(|s| slot_label(s.pc, Some(s.instr.mnemonic)));
        let fetched =
            |f: &Option<Fetched>| f.as_ref().map(|f| slot_label(f.pc, f.decoded.as_ref().ok().map(|d| d.mnemonic)));
        [
            fetched(&self.fetch.pending),
            fetched(&self.latches.if_id),
            infl(&self.latches.id_ex),
            infl(&self.latches.ex_mem),
            infl(&self.latches.mem_wb),
        ]
    }

    fn trace_line(&self, ev: &CycleEvents, labels: &[Option<String>; 5]) -> String {
        let mut line = format!("{:>5}", ev.cycle);
        for (name, label) in STAGE_NAMES.iter().zip(labels) {
            let _ = write!(line, " | {name:<3} {:<14}", label.as_deref().unwrap_or("-"));
        }
        let note = match (ev.stall, ev.flush) {
            (Some(c), _) => c.label(),
            (None, true) => "flush",
            (None, false) => "-",
        };
        let _ = write!(line, " | {note:<8} | apr={:08x}", self.state.apr);
        line.trim_end().to_string()
    }

    /// Step until `ebreak` retires.
    pub fn run_to_halt(mut self) -> Result<TimedRun, SimError> {
        while !self.state.halted {
            self.step()?;
        }
        let stats = self.stats();
        Ok(TimedRun {
            state: self.state,
            memory: self.memory,
            stats,
            trace: self.trace,
        })
    }
}

/// Load `image` and `data`, then simulate to completion.
pub fn run(
    image: &ProgramImage,
    data: &[DataSegment],
    config: &SimConfig,
) -> Result<TimedRun, SimError> {
    Pipeline::new(image, data, config)?.run_to_halt()
}

//! Architectural state, instruction semantics and the untimed executor.
//!
//! [`exec_functional`] runs a program one instruction at a time with no
//! notion of stages or caches. It is the reference the timed pipeline must
//! agree with bit for bit.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::asm::ProgramImage;
use crate::fpu;
use crate::isa::{DecodedInstruction, IsaError, Mnemonic, RegClass, RegRef, RoundingMode};
use crate::mem::{MemError, Memory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("illegal instruction {word:#010x} at pc {pc:#x}: {source}")]
    IllegalInstruction {
        pc: u64,
        word: u32,
        source: IsaError,
    },
    #[error("memory fault at pc {pc:#x}: {source}")]
    Memory { pc: u64, source: MemError },
    #[error("instruction fetch outside memory at pc {0:#x}")]
    FetchFault(u64),
    #[error("exceeded the limit of {0} cycles without halting")]
    MaxCycles(u64),
    #[error("invalid simulator configuration: {0}")]
    Config(String),
}

/// Bytes written to memory before execution starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSegment {
    pub addr: u64,
    pub bytes: Vec<u8>,
}

impl DataSegment {
    pub fn from_f32_bits(addr: u64, values: &[u32]) -> Self {
        DataSegment {
            addr,
            bytes: values.iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    pub pc: u64,
    pub xregs: [u64; 32],
    /// Single-precision registers as raw bits.
    pub fregs: [u32; 32],
    pub frm: RoundingMode,
    /// Architectural Pipeline Register: the running MAC partial sum. In
    /// the timed model it sits beside the MEM/WB latch.
    pub apr: u32,
    pub halted: bool,
}

impl MachineState {
    pub fn reset(pc: u64) -> Self {
        MachineState {
            pc,
            xregs: [0; 32],
            fregs: [0; 32],
            frm: RoundingMode::Rne,
            apr: fpu::POS_ZERO,
            halted: false,
        }
    }

    pub fn read(&self, r: RegRef) -> u64 {
        match r.class {
            RegClass::X => self.xregs[r.index as usize],
            RegClass::F => self.fregs[r.index as usize] as u64,
        }
    }

    /// Register write; x0 stays zero.
    pub fn write(&mut self, r: RegRef, value: u64) {
        match r.class {
            RegClass::X if r.index == 0 => {}
            RegClass::X => self.xregs[r.index as usize] = value,
            RegClass::F => self.fregs[r.index as usize] = value as u32,
        }
    }
}

/// Retired-instruction counters indexed by [`Mnemonic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MnemonicCounts(pub [u64; Mnemonic::COUNT]);

impl MnemonicCounts {
    pub fn get(&self, m: Mnemonic) -> u64 {
        self.0[m.index()]
    }

    pub fn bump(&mut self, m: Mnemonic) {
        self.0[m.index()] += 1;
    }

    pub fn add(&mut self, m: Mnemonic, n: u64) {
        self.0[m.index()] += n;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn mem_type(&self) -> u64 {
        Mnemonic::ALL
            .iter()
            .filter(|m| m.is_mem_type())
            .map(|&m| self.get(m))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Mnemonic, u64)> + '_ {
        Mnemonic::ALL.iter().map(|&m| (m, self.get(m)))
    }

    pub fn merge(&mut self, other: &MnemonicCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
    }
}

impl fmt::Display for MnemonicCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, n) in self.iter().filter(|&(_, n)| n > 0) {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{m}={n}")?;
            first = false;
        }
        Ok(())
    }
}

impl Serialize for MnemonicCounts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, u64> = self
            .iter()
            .filter(|&(_, n)| n > 0)
            .map(|(m, n)| (m.as_str(), n))
            .collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MnemonicCounts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, u64>::deserialize(d)?;
        let mut counts = MnemonicCounts::default();
        for (name, n) in map {
            let m = Mnemonic::parse(&name)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown mnemonic {name}")))?;
            counts.add(m, n);
        }
        Ok(counts)
    }
}

/// What the EX stage (or the single-step executor) computes for one
/// instruction, before any memory access.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecOutcome {
    /// Destination value for ALU/FP ops; unused for loads until MEM fills it.
    pub value: u64,
    /// Effective address for loads and stores.
    pub addr: u64,
    /// Store data.
    pub store: u64,
    /// Rounded product for `rfmac.s`, accumulated in the MEM stage.
    pub product: u32,
    /// Redirect target when a branch is taken or a jump executes.
    pub redirect: Option<u64>,
}

/// Combinational semantics. `ops` are the source operand values in the
/// order given by [`DecodedInstruction::sources`].
pub(crate) fn execute(instr: &DecodedInstruction, pc: u64, ops: [u64; 3]) -> ExecOutcome {
    use Mnemonic::*;
    let [a, b, c] = ops;
    let imm = instr.imm as u64;
    let mut out = ExecOutcome::default();
    match instr.mnemonic {
        Add => out.value = a.wrapping_add(b),
        Addi => out.value = a.wrapping_add(imm),
        Slli => out.value = a << (instr.imm & 63),
        Lui => out.value = imm,
        Auipc => out.value = pc.wrapping_add(imm),
        Jal => {
            out.value = pc.wrapping_add(4);
            out.redirect = Some(pc.wrapping_add(imm));
        }
        Beq | Bne | Blt | Bge => {
            let taken = match instr.mnemonic {
                Beq => a == b,
                Bne => a != b,
                Blt => (a as i64) < (b as i64),
                _ => (a as i64) >= (b as i64),
            };
            if taken {
                out.redirect = Some(pc.wrapping_add(imm));
            }
        }
        Lw | Ld | Flw => out.addr = a.wrapping_add(imm),
        Sw | Sd | Fsw => {
            out.addr = a.wrapping_add(imm);
            out.store = b;
        }
        FaddS => out.value = fpu::add(a as u32, b as u32) as u64,
        FmulS => out.value = fpu::mul(a as u32, b as u32) as u64,
        FmacS => out.value = fpu::mac(c as u32, a as u32, b as u32) as u64,
        RfmacS => out.product = fpu::mul(a as u32, b as u32),
        RfsmacS | Ebreak => {}
    }
    out
}

/// Perform the data-memory side of a load or store. Returns the value a
/// load writes back.
pub(crate) fn memory_access(
    instr: &DecodedInstruction,
    out: &ExecOutcome,
    memory: &mut Memory,
) -> Result<u64, MemError> {
    use Mnemonic::*;
    Ok(match instr.mnemonic {
        Lw => memory.read_bytes(out.addr, 4)? as u32 as i32 as i64 as u64,
        Ld => memory.read_bytes(out.addr, 8)?,
        Flw => memory.read_bytes(out.addr, 4)?,
        Sw | Fsw => {
            memory.write_bytes(out.addr, &(out.store as u32).to_le_bytes())?;
            0
        }
        Sd => {
            memory.write_bytes(out.addr, &out.store.to_le_bytes())?;
            0
        }
        _ => 0,
    })
}

pub(crate) fn access_size(m: Mnemonic) -> usize {
    match m {
        Mnemonic::Ld | Mnemonic::Sd => 8,
        _ => 4,
    }
}

/// Load the image and data segments into a fresh memory.
pub fn load_program(
    image: &ProgramImage,
    data: &[DataSegment],
    memory_bytes: u64,
) -> Result<Memory, SimError> {
    let mut memory = Memory::new(memory_bytes);
    let code: Vec<u8> = image.words.iter().flat_map(|w| w.to_le_bytes()).collect();
    memory
        .load_segment(image.base, &code)
        .map_err(|source| SimError::Memory {
            pc: image.base,
            source,
        })?;
    for seg in data {
        memory
            .load_segment(seg.addr, &seg.bytes)
            .map_err(|source| SimError::Memory {
                pc: image.base,
                source,
            })?;
    }
    Ok(memory)
}

/// Instruction lookup shared by both executors: image words are decoded
/// once, and a fetched word that differs from the image is decoded afresh.
#[derive(Debug, Clone)]
pub(crate) struct Predecoded {
    base: u64,
    entries: Vec<(u32, Result<DecodedInstruction, IsaError>)>,
}

impl Predecoded {
    pub fn new(image: &ProgramImage) -> Self {
        Predecoded {
            base: image.base,
            entries: image
                .words
                .iter()
                .map(|&w| (w, crate::isa::decode(w)))
                .collect(),
        }
    }

    pub fn decode(&self, pc: u64, word: u32) -> Result<DecodedInstruction, IsaError> {
        let idx = pc.wrapping_sub(self.base) / 4;
        match self.entries.get(idx as usize) {
            Some((w, d)) if *w == word && pc >= self.base => d.clone(),
            _ => crate::isa::decode(word),
        }
    }
}

pub(crate) fn fetch_word(memory: &Memory, pc: u64) -> Result<u32, SimError> {
    memory.read_u32(pc).map_err(|_| SimError::FetchFault(pc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalRun {
    pub state: MachineState,
    pub memory: Memory,
    pub counts: MnemonicCounts,
}

/// Execute `image` architecturally until `ebreak` retires. `max_steps`
/// bounds the number of retired instructions.
pub fn exec_functional(
    image: &ProgramImage,
    data: &[DataSegment],
    memory_bytes: u64,
    max_steps: u64,
) -> Result<FunctionalRun, SimError> {
    let mut memory = load_program(image, data, memory_bytes)?;
    let program = Predecoded::new(image);
    let mut state = MachineState::reset(image.base);
    let mut counts = MnemonicCounts::default();
    let mut steps = 0u64;

    while !state.halted {
        if steps >= max_steps {
            return Err(SimError::MaxCycles(max_steps));
        }
        steps += 1;
        let pc = state.pc;
        let word = fetch_word(&memory, pc)?;
        let instr = program
            .decode(pc, word)
            .map_err(|source| SimError::IllegalInstruction { pc, word, source })?;
        let mut ops = [0u64; 3];
        for (slot, src) in ops.iter_mut().zip(instr.sources()) {
            *slot = state.read(src);
        }
        let mut out = execute(&instr, pc, ops);
        let m = instr.mnemonic;
        if m.is_mem_type() {
            out.value = memory_access(&instr, &out, &mut memory)
                .map_err(|source| SimError::Memory { pc, source })?;
        }
        match m {
            Mnemonic::RfmacS => state.apr = fpu::add(state.apr, out.product),
            Mnemonic::RfsmacS => {
                out.value = state.apr as u64;
                state.apr = fpu::POS_ZERO;
            }
            Mnemonic::Ebreak => state.halted = true,
            _ => {}
        }
        if let Some(rd) = instr.dest() {
            state.write(rd, out.value);
        }
        counts.bump(m);
        if !state.halted {
            state.pc = out.redirect.unwrap_or(pc.wrapping_add(4));
        }
    }
    Ok(FunctionalRun {
        state,
        memory,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble;

    const MEM: u64 = 1 << 24;

    fn run(src: &str, data: &[DataSegment]) -> FunctionalRun {
        let img = assemble(src, 0x1000).unwrap();
        exec_functional(&img, data, MEM, 100_000).unwrap()
    }

    #[test]
    fn rfmac_accumulates_into_apr_only() {
        let data = [DataSegment::from_f32_bits(
            0x8000,
            &[1.5f32.to_bits(), 2.0f32.to_bits(), 0.25f32.to_bits()],
        )];
        let r = run(
            "lui a0, 0x8
             flw fa5, 0(a0)
             flw fa4, 4(a0)
             flw fa3, 8(a0)
             rfmac.s fa5, fa4
             rfmac.s fa3, fa4
             ebreak",
            &data,
        );
        assert_eq!(r.state.fregs[15], 1.5f32.to_bits());
        assert_eq!(r.state.fregs[14], 2.0f32.to_bits());
        assert_eq!(f32::from_bits(r.state.apr), 3.5);
    }

    #[test]
    fn rfsmac_moves_and_clears_apr() {
        let data = [DataSegment::from_f32_bits(0x8000, &[3.0f32.to_bits()])];
        let r = run(
            "lui a0, 0x8
             flw fa5, 0(a0)
             rfmac.s fa5, fa5
             rfsmac.s fa4
             rfsmac.s fa3
             ebreak",
            &data,
        );
        assert_eq!(f32::from_bits(r.state.fregs[14]), 9.0);
        assert_eq!(r.state.fregs[13], 0);
        assert_eq!(r.state.apr, 0);
    }

    #[test]
    fn x0_stays_zero() {
        let r = run("addi x0, x0, 7\nlui zero, 0x1\nadd a0, x0, x0\nebreak", &[]);
        assert_eq!(r.state.xregs[0], 0);
        assert_eq!(r.state.xregs[10], 0);
    }

    #[test]
    fn memory_ops_and_loops() {
        let r = run(
            "lui a0, 0x8
             addi a1, zero, -3
             sw a1, 0(a0)
             lw a2, 0(a0)
             sd a1, 8(a0)
             ld a3, 8(a0)
             addi t0, zero, 0
             addi t1, zero, 5
             loop: addi t0, t0, 1
             blt t0, t1, loop
             slli t2, t1, 3
             auipc t3, 0
             jal ra, done
             addi t4, zero, 1
             done: ebreak",
            &[],
        );
        assert_eq!(r.state.xregs[12] as i64, -3);
        assert_eq!(r.state.xregs[13] as i64, -3);
        assert_eq!(r.state.xregs[5], 5);
        assert_eq!(r.state.xregs[7], 40);
        assert_eq!(r.state.xregs[28], 0x1000 + 4 * 11);
        assert_eq!(r.state.xregs[1], 0x1000 + 4 * 13);
        assert_eq!(r.state.xregs[29], 0);
        assert_eq!(r.memory.read_u32(0x8000).unwrap(), (-3i32) as u32);
        assert_eq!(r.counts.get(Mnemonic::Blt), 5);
        assert_eq!(r.state.pc, 0x1000 + 4 * 14);
    }

    #[test]
    fn traps() {
        let img = assemble("lui a0, 0x8\nlw a1, 2(a0)\nebreak", 0x1000).unwrap();
        assert!(matches!(
            exec_functional(&img, &[], MEM, 100),
            Err(SimError::Memory {
                source: MemError::Misaligned { .. },
                ..
            })
        ));
        let img = assemble("addi a0, a0, 1", 0x1000).unwrap();
        assert!(matches!(
            exec_functional(&img, &[], MEM, 100),
            Err(SimError::IllegalInstruction { pc: 0x1004, word: 0, .. })
        ));
        let img = assemble("spin: j spin", 0x1000).unwrap();
        assert_eq!(
            exec_functional(&img, &[], MEM, 100),
            Err(SimError::MaxCycles(100))
        );
    }
}

//! Supported instruction subset, binary encodings and the MASK/MATCH
//! decode registry.
//!
//! The subset covers the RV64I control and address instructions the kernel
//! generator needs, the single-precision F-extension ops, the baseline
//! `fmac.s` and the accumulator pair `rfmac.s` / `rfsmac.s`. All FP ops
//! share the OP-FP major opcode with `fmt = 00`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// OP-FP major opcode shared by every FP arithmetic instruction.
pub const OPCODE_OP_FP: u32 = 0b101_0011;
/// Dynamic rounding mode: resolve through `frm`.
pub const RM_DYN: u8 = 0b111;
/// Round to nearest, ties to even.
pub const RM_RNE: u8 = 0b000;

pub const FUNCT7_FADD_S: u32 = 0b000_0000;
pub const FUNCT7_FMUL_S: u32 = 0b000_1000;
pub const FUNCT7_FMAC_S: u32 = 0b011_0000;
pub const FUNCT7_RFMAC_S: u32 = 0b011_0100;
pub const FUNCT7_RFSMAC_S: u32 = 0b011_1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsaError {
    #[error("illegal instruction word {0:#010x}")]
    IllegalInstruction(u32),
    #[error("{mnemonic}: immediate {imm} out of range")]
    ImmediateOutOfRange { mnemonic: Mnemonic, imm: i64 },
    #[error("{mnemonic}: invalid register index {index}")]
    InvalidRegister { mnemonic: Mnemonic, index: u8 },
    #[error("unsupported rounding mode {0:#05b} (only RNE is implemented)")]
    UnsupportedRoundingMode(u8),
    #[error("{mnemonic}: field `{field}` must be {expected}")]
    InvalidField {
        mnemonic: Mnemonic,
        field: &'static str,
        expected: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Mnemonic {
    Add,
    Addi,
    Slli,
    Lui,
    Auipc,
    Jal,
    Beq,
    Bne,
    Blt,
    Bge,
    Lw,
    Sw,
    Ld,
    Sd,
    Flw,
    Fsw,
    FaddS,
    FmulS,
    FmacS,
    RfmacS,
    RfsmacS,
    Ebreak,
}

impl Mnemonic {
    pub const COUNT: usize = 22;

    pub const ALL: [Mnemonic; Self::COUNT] = [
        Mnemonic::Add,
        Mnemonic::Addi,
        Mnemonic::Slli,
        Mnemonic::Lui,
        Mnemonic::Auipc,
        Mnemonic::Jal,
        Mnemonic::Beq,
        Mnemonic::Bne,
        Mnemonic::Blt,
        Mnemonic::Bge,
        Mnemonic::Lw,
        Mnemonic::Sw,
        Mnemonic::Ld,
        Mnemonic::Sd,
        Mnemonic::Flw,
        Mnemonic::Fsw,
        Mnemonic::FaddS,
        Mnemonic::FmulS,
        Mnemonic::FmacS,
        Mnemonic::RfmacS,
        Mnemonic::RfsmacS,
        Mnemonic::Ebreak,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mnemonic::Add => "add",
            Mnemonic::Addi => "addi",
            Mnemonic::Slli => "slli",
            Mnemonic::Lui => "lui",
            Mnemonic::Auipc => "auipc",
            Mnemonic::Jal => "jal",
            Mnemonic::Beq => "beq",
            Mnemonic::Bne => "bne",
            Mnemonic::Blt => "blt",
            Mnemonic::Bge => "bge",
            Mnemonic::Lw => "lw",
            Mnemonic::Sw => "sw",
            Mnemonic::Ld => "ld",
            Mnemonic::Sd => "sd",
            Mnemonic::Flw => "flw",
            Mnemonic::Fsw => "fsw",
            Mnemonic::FaddS => "fadd.s",
            Mnemonic::FmulS => "fmul.s",
            Mnemonic::FmacS => "fmac.s",
            Mnemonic::RfmacS => "rfmac.s",
            Mnemonic::RfsmacS => "rfsmac.s",
            Mnemonic::Ebreak => "ebreak",
        }
    }

    pub fn parse(text: &str) -> Option<Mnemonic> {
        Self::ALL.iter().copied().find(|m| m.as_str() == text)
    }

    /// Position in [`Mnemonic::ALL`]; used to index per-mnemonic counters.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn format(self) -> FormatClass {
        use Mnemonic::*;
        match self {
            Add => FormatClass::R,
            Addi | Slli | Lw | Ld | Flw | Ebreak => FormatClass::I,
            Sw | Sd | Fsw => FormatClass::S,
            Beq | Bne | Blt | Bge => FormatClass::B,
            Lui | Auipc => FormatClass::U,
            Jal => FormatClass::J,
            FaddS | FmulS | FmacS | RfmacS | RfsmacS => FormatClass::FpR,
        }
    }

    pub fn is_load(self) -> bool {
        matches!(self, Mnemonic::Lw | Mnemonic::Ld | Mnemonic::Flw)
    }

    pub fn is_store(self) -> bool {
        matches!(self, Mnemonic::Sw | Mnemonic::Sd | Mnemonic::Fsw)
    }

    /// Loads and stores: the instructions that touch the data cache.
    pub fn is_mem_type(self) -> bool {
        self.is_load() || self.is_store()
    }

    pub fn is_branch(self) -> bool {
        self.format() == FormatClass::B
    }

    pub fn is_fp_arith(self) -> bool {
        self.format() == FormatClass::FpR
    }

    /// Register class written through `rd`, if any.
    pub fn dest(self) -> Option<RegClass> {
        use Mnemonic::*;
        match self {
            Add | Addi | Slli | Lui | Auipc | Jal | Lw | Ld => Some(RegClass::X),
            Flw | FaddS | FmulS | FmacS | RfsmacS => Some(RegClass::F),
            Beq | Bne | Blt | Bge | Sw | Sd | Fsw | RfmacS | Ebreak => None,
        }
    }
}

impl fmt::Display for Mnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FormatClass {
    #[serde(rename = "R-type")]
    R,
    #[serde(rename = "I-type")]
    I,
    #[serde(rename = "S-type")]
    S,
    #[serde(rename = "B-type")]
    B,
    #[serde(rename = "U-type")]
    U,
    #[serde(rename = "J-type")]
    J,
    #[serde(rename = "FP-R-type")]
    FpR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegClass {
    X,
    F,
}

/// A source operand read by an instruction: register class plus index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegRef {
    pub class: RegClass,
    pub index: u8,
}

impl RegRef {
    pub fn x(index: u8) -> Self {
        RegRef { class: RegClass::X, index }
    }

    pub fn f(index: u8) -> Self {
        RegRef { class: RegClass::F, index }
    }
}

/// The only rounding mode the datapath implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum RoundingMode {
    #[default]
    Rne,
}

impl RoundingMode {
    /// Resolve an instruction `rm` field against the `frm` CSR.
    pub fn resolve(rm: u8, frm: RoundingMode) -> Result<RoundingMode, IsaError> {
        match rm {
            RM_RNE => Ok(RoundingMode::Rne),
            RM_DYN => Ok(frm),
            other => Err(IsaError::UnsupportedRoundingMode(other)),
        }
    }
}

/// One instruction after decode. Fields the mnemonic does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecodedInstruction {
    pub mnemonic: Mnemonic,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub imm: i64,
    pub rm: u8,
    pub fmt: u8,
}

impl DecodedInstruction {
    fn bare(mnemonic: Mnemonic) -> Self {
        DecodedInstruction {
            mnemonic,
            rd: 0,
            rs1: 0,
            rs2: 0,
            imm: 0,
            rm: 0,
            fmt: 0,
        }
    }

    /// `add`.
    pub fn r(mnemonic: Mnemonic, rd: u8, rs1: u8, rs2: u8) -> Self {
        DecodedInstruction {
            rd,
            rs1,
            rs2,
            ..Self::bare(mnemonic)
        }
    }

    /// `addi`, `slli`, loads.
    pub fn i(mnemonic: Mnemonic, rd: u8, rs1: u8, imm: i64) -> Self {
        DecodedInstruction {
            rd,
            rs1,
            imm,
            ..Self::bare(mnemonic)
        }
    }

    /// Stores and branches: `rs1`, `rs2`, immediate.
    pub fn s(mnemonic: Mnemonic, rs1: u8, rs2: u8, imm: i64) -> Self {
        DecodedInstruction {
            rs1,
            rs2,
            imm,
            ..Self::bare(mnemonic)
        }
    }

    /// `lui`, `auipc`, `jal`. For U-type `imm` is the full sign-extended
    /// value (upper 20 bits shifted into place).
    pub fn u(mnemonic: Mnemonic, rd: u8, imm: i64) -> Self {
        DecodedInstruction {
            rd,
            imm,
            ..Self::bare(mnemonic)
        }
    }

    /// FP register-register op with the dynamic rounding mode.
    pub fn fp(mnemonic: Mnemonic, rd: u8, rs1: u8, rs2: u8) -> Self {
        let (rd, rs1, rs2) = match mnemonic {
            Mnemonic::RfmacS => (0, rs1, rs2),
            Mnemonic::RfsmacS => (rd, 0, 0),
            _ => (rd, rs1, rs2),
        };
        DecodedInstruction {
            rd,
            rs1,
            rs2,
            rm: RM_DYN,
            ..Self::bare(mnemonic)
        }
    }

    pub fn ebreak() -> Self {
        Self::bare(Mnemonic::Ebreak)
    }

    /// Source registers in operand order. x0 is included; callers that
    /// track hazards must ignore it.
    pub fn sources(&self) -> impl Iterator<Item = RegRef> {
        use Mnemonic::*;
        let srcs: [Option<RegRef>; 3] = match self.mnemonic {
            Add | Beq | Bne | Blt | Bge | Sw | Sd => {
                [Some(RegRef::x(self.rs1)), Some(RegRef::x(self.rs2)), None]
            }
            Addi | Slli | Lw | Ld | Flw => [Some(RegRef::x(self.rs1)), None, None],
            Fsw => [Some(RegRef::x(self.rs1)), Some(RegRef::f(self.rs2)), None],
            FaddS | FmulS | RfmacS => [Some(RegRef::f(self.rs1)), Some(RegRef::f(self.rs2)), None],
            FmacS => [
                Some(RegRef::f(self.rs1)),
                Some(RegRef::f(self.rs2)),
                Some(RegRef::f(self.rd)),
            ],
            Lui | Auipc | Jal | RfsmacS | Ebreak => [None, None, None],
        };
        srcs.into_iter().flatten()
    }

    /// Destination register, if the instruction writes one. Writes to x0
    /// are reported; the register file discards them.
    pub fn dest(&self) -> Option<RegRef> {
        self.mnemonic.dest().map(|class| RegRef {
            class,
            index: self.rd,
        })
    }

    /// Check the field invariants for this mnemonic.
    pub fn validate(&self) -> Result<(), IsaError> {
        let m = self.mnemonic;
        for index in [self.rd, self.rs1, self.rs2] {
            if index > 31 {
                return Err(IsaError::InvalidRegister { mnemonic: m, index });
            }
        }
        let zero = |field: &'static str, value: i64| -> Result<(), IsaError> {
            if value != 0 {
                return Err(IsaError::InvalidField {
                    mnemonic: m,
                    field,
                    expected: "0",
                });
            }
            Ok(())
        };
        zero("fmt", self.fmt as i64)?;
        if m.is_fp_arith() {
            if self.rm != RM_RNE && self.rm != RM_DYN {
                if self.rm > 7 {
                    return Err(IsaError::InvalidField {
                        mnemonic: m,
                        field: "rm",
                        expected: "a 3-bit value",
                    });
                }
                return Err(IsaError::UnsupportedRoundingMode(self.rm));
            }
            zero("imm", self.imm)?;
            match m {
                Mnemonic::RfmacS => zero("rd", self.rd as i64)?,
                Mnemonic::RfsmacS => {
                    zero("rs1", self.rs1 as i64)?;
                    zero("rs2", self.rs2 as i64)?;
                }
                _ => {}
            }
            return Ok(());
        }
        zero("rm", self.rm as i64)?;
        let in_range = match m {
            Mnemonic::Ebreak => {
                zero("rd", self.rd as i64)?;
                zero("rs1", self.rs1 as i64)?;
                zero("rs2", self.rs2 as i64)?;
                self.imm == 0
            }
            Mnemonic::Slli => (0..=63).contains(&self.imm),
            _ => match m.format() {
                FormatClass::R => self.imm == 0,
                FormatClass::I | FormatClass::S => (-2048..=2047).contains(&self.imm),
                FormatClass::B => (-4096..=4094).contains(&self.imm) && self.imm % 2 == 0,
                FormatClass::U => {
                    self.imm % 4096 == 0 && (i32::MIN as i64..=i32::MAX as i64).contains(&self.imm)
                }
                FormatClass::J => {
                    (-(1 << 20)..=(1 << 20) - 2).contains(&self.imm) && self.imm % 2 == 0
                }
                FormatClass::FpR => unreachable!(),
            },
        };
        if !in_range {
            return Err(IsaError::ImmediateOutOfRange {
                mnemonic: m,
                imm: self.imm,
            });
        }
        match m.format() {
            FormatClass::I if m != Mnemonic::Ebreak => zero("rs2", self.rs2 as i64),
            FormatClass::S | FormatClass::B => zero("rd", self.rd as i64),
            FormatClass::U | FormatClass::J => {
                zero("rs1", self.rs1 as i64)?;
                zero("rs2", self.rs2 as i64)
            }
            _ => Ok(()),
        }
    }
}

/// Registry row: a word `w` is this instruction iff `w & mask == match`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EncodingEntry {
    pub mnemonic: Mnemonic,
    pub mask: u32,
    #[serde(rename = "match")]
    pub match_: u32,
    pub format: FormatClass,
}

impl EncodingEntry {
    const fn new(mnemonic: Mnemonic, mask: u32, match_: u32, format: FormatClass) -> Self {
        EncodingEntry {
            mnemonic,
            mask,
            match_,
            format,
        }
    }

    pub fn matches(&self, word: u32) -> bool {
        word & self.mask == self.match_
    }

    /// Two entries collide iff some word satisfies both, which happens
    /// exactly when their matches agree on every commonly fixed bit.
    pub fn collides_with(&self, other: &EncodingEntry) -> bool {
        (self.match_ ^ other.match_) & self.mask & other.mask == 0
    }
}

const MASK_OPCODE: u32 = 0x0000_007F;
const MASK_FUNCT3: u32 = 0x0000_707F;
const MASK_FUNCT7_FUNCT3: u32 = 0xFE00_707F;
const MASK_FUNCT7: u32 = 0xFE00_007F;
const MASK_FUNCT7_RS1_RS2: u32 = 0xFFFF_807F;

const fn fp_match(funct7: u32) -> u32 {
    (funct7 << 25) | OPCODE_OP_FP
}

static REGISTRY: [EncodingEntry; Mnemonic::COUNT] = {
    use FormatClass as F;
    use Mnemonic::*;
    [
        EncodingEntry::new(Add, MASK_FUNCT7_FUNCT3, 0x0000_0033, F::R),
        EncodingEntry::new(Addi, MASK_FUNCT3, 0x0000_0013, F::I),
        EncodingEntry::new(Slli, 0xFC00_707F, 0x0000_1013, F::I),
        EncodingEntry::new(Lui, MASK_OPCODE, 0x0000_0037, F::U),
        EncodingEntry::new(Auipc, MASK_OPCODE, 0x0000_0017, F::U),
        EncodingEntry::new(Jal, MASK_OPCODE, 0x0000_006F, F::J),
        EncodingEntry::new(Beq, MASK_FUNCT3, 0x0000_0063, F::B),
        EncodingEntry::new(Bne, MASK_FUNCT3, 0x0000_1063, F::B),
        EncodingEntry::new(Blt, MASK_FUNCT3, 0x0000_4063, F::B),
        EncodingEntry::new(Bge, MASK_FUNCT3, 0x0000_5063, F::B),
        EncodingEntry::new(Lw, MASK_FUNCT3, 0x0000_2003, F::I),
        EncodingEntry::new(Sw, MASK_FUNCT3, 0x0000_2023, F::S),
        EncodingEntry::new(Ld, MASK_FUNCT3, 0x0000_3003, F::I),
        EncodingEntry::new(Sd, MASK_FUNCT3, 0x0000_3023, F::S),
        EncodingEntry::new(Flw, MASK_FUNCT3, 0x0000_2007, F::I),
        EncodingEntry::new(Fsw, MASK_FUNCT3, 0x0000_2027, F::S),
        EncodingEntry::new(FaddS, MASK_FUNCT7, fp_match(FUNCT7_FADD_S), F::FpR),
        EncodingEntry::new(FmulS, MASK_FUNCT7, fp_match(FUNCT7_FMUL_S), F::FpR),
        EncodingEntry::new(FmacS, MASK_FUNCT7, fp_match(FUNCT7_FMAC_S), F::FpR),
        EncodingEntry::new(RfmacS, MASK_FUNCT7, fp_match(FUNCT7_RFMAC_S), F::FpR),
        EncodingEntry::new(RfsmacS, MASK_FUNCT7_RS1_RS2, fp_match(FUNCT7_RFSMAC_S), F::FpR),
        EncodingEntry::new(Ebreak, 0xFFFF_FFFF, 0x0010_0073, F::I),
    ]
};

/// The decode registry, in [`Mnemonic::ALL`] order.
pub fn registry() -> &'static [EncodingEntry] {
    &REGISTRY
}

pub fn entry(mnemonic: Mnemonic) -> &'static EncodingEntry {
    &REGISTRY[mnemonic.index()]
}

/// Registry as a JSON array of `{mnemonic, mask, match, format}` with hex
/// strings for the bit patterns.
pub fn registry_json() -> serde_json::Value {
    let rows: Vec<serde_json::Value> = REGISTRY
        .iter()
        .map(|e| {
            serde_json::json!({
                "mnemonic": e.mnemonic.as_str(),
                "mask": format!("{:#010x}", e.mask),
                "match": format!("{:#010x}", e.match_),
                "format": e.format,
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}

fn bits(value: i64, hi: u32, lo: u32) -> u32 {
    ((value as u64 >> lo) & ((1u64 << (hi - lo + 1)) - 1)) as u32
}

pub fn encode(instr: &DecodedInstruction) -> Result<u32, IsaError> {
    instr.validate()?;
    let e = entry(instr.mnemonic);
    let rd = (instr.rd as u32) << 7;
    let rs1 = (instr.rs1 as u32) << 15;
    let rs2 = (instr.rs2 as u32) << 20;
    let imm = instr.imm;
    let fields = match e.format {
        FormatClass::R => rd | rs1 | rs2,
        FormatClass::FpR => rd | rs1 | rs2 | ((instr.rm as u32) << 12) | ((instr.fmt as u32) << 25),
        FormatClass::I if instr.mnemonic == Mnemonic::Ebreak => 0,
        FormatClass::I => rd | rs1 | (bits(imm, 11, 0) << 20),
        FormatClass::S => rs1 | rs2 | (bits(imm, 11, 5) << 25) | (bits(imm, 4, 0) << 7),
        FormatClass::B => {
            rs1 | rs2
                | (bits(imm, 12, 12) << 31)
                | (bits(imm, 10, 5) << 25)
                | (bits(imm, 4, 1) << 8)
                | (bits(imm, 11, 11) << 7)
        }
        FormatClass::U => rd | (bits(imm, 31, 12) << 12),
        FormatClass::J => {
            rd | (bits(imm, 20, 20) << 31)
                | (bits(imm, 10, 1) << 21)
                | (bits(imm, 11, 11) << 20)
                | (bits(imm, 19, 12) << 12)
        }
    };
    let word = (fields & !e.mask) | e.match_;
    debug_assert!(e.matches(word));
    Ok(word)
}

fn sext(value: u32, width: u32) -> i64 {
    let shift = 64 - width;
    ((value as i64) << shift) >> shift
}

fn field(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1u32 << (hi - lo + 1)) - 1)
}

/// Find the registry entry whose mask/match accepts `word`.
pub fn lookup(word: u32) -> Option<&'static EncodingEntry> {
    REGISTRY.iter().find(|e| e.matches(word))
}

pub fn decode(word: u32) -> Result<DecodedInstruction, IsaError> {
    let e = lookup(word).ok_or(IsaError::IllegalInstruction(word))?;
    let m = e.mnemonic;
    let rd = field(word, 11, 7) as u8;
    let rs1 = field(word, 19, 15) as u8;
    let rs2 = field(word, 24, 20) as u8;
    let instr = match e.format {
        FormatClass::R => DecodedInstruction::r(m, rd, rs1, rs2),
        FormatClass::FpR => {
            let rm = field(word, 14, 12) as u8;
            RoundingMode::resolve(rm, RoundingMode::Rne)?;
            let mut d = DecodedInstruction::fp(m, rd, rs1, rs2);
            d.rm = rm;
            d.fmt = field(word, 26, 25) as u8;
            d
        }
        FormatClass::I if m == Mnemonic::Ebreak => DecodedInstruction::ebreak(),
        FormatClass::I if m == Mnemonic::Slli => {
            DecodedInstruction::i(m, rd, rs1, field(word, 25, 20) as i64)
        }
        FormatClass::I => DecodedInstruction::i(m, rd, rs1, sext(field(word, 31, 20), 12)),
        FormatClass::S => {
            let imm = (field(word, 31, 25) << 5) | field(word, 11, 7);
            DecodedInstruction::s(m, rs1, rs2, sext(imm, 12))
        }
        FormatClass::B => {
            let imm = (field(word, 31, 31) << 12)
                | (field(word, 7, 7) << 11)
                | (field(word, 30, 25) << 5)
                | (field(word, 11, 8) << 1);
            DecodedInstruction::s(m, rs1, rs2, sext(imm, 13))
        }
        FormatClass::U => DecodedInstruction::u(m, rd, sext(word & 0xFFFF_F000, 32)),
        FormatClass::J => {
            let imm = (field(word, 31, 31) << 20)
                | (field(word, 19, 12) << 12)
                | (field(word, 20, 20) << 11)
                | (field(word, 30, 21) << 1);
            DecodedInstruction::u(m, rd, sext(imm, 21))
        }
    };
    Ok(instr)
}

const X_ABI: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

const F_ABI: [&str; 32] = [
    "ft0", "ft1", "ft2", "ft3", "ft4", "ft5", "ft6", "ft7", "fs0", "fs1", "fa0", "fa1", "fa2",
    "fa3", "fa4", "fa5", "fa6", "fa7", "fs2", "fs3", "fs4", "fs5", "fs6", "fs7", "fs8", "fs9",
    "fs10", "fs11", "ft8", "ft9", "ft10", "ft11",
];

pub fn x_name(index: u8) -> &'static str {
    X_ABI[index as usize & 31]
}

pub fn f_name(index: u8) -> &'static str {
    F_ABI[index as usize & 31]
}

/// Parse an integer register: `x0`..`x31` or its ABI name (`fp` = `s0`).
pub fn parse_x(name: &str) -> Option<u8> {
    if name == "fp" {
        return Some(8);
    }
    if let Some(n) = name.strip_prefix('x').and_then(|n| n.parse::<u8>().ok()) {
        return (n < 32).then_some(n);
    }
    X_ABI.iter().position(|&a| a == name).map(|i| i as u8)
}

/// Parse an FP register: `f0`..`f31` or its ABI name.
pub fn parse_f(name: &str) -> Option<u8> {
    if let Some(n) = name.strip_prefix('f').and_then(|n| n.parse::<u8>().ok()) {
        return (n < 32).then_some(n);
    }
    F_ABI.iter().position(|&a| a == name).map(|i| i as u8)
}

impl fmt::Display for DecodedInstruction {
    /// Assembly rendering; branch and jump targets are printed as
    /// PC-relative byte offsets.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Mnemonic::*;
        let m = self.mnemonic;
        let (x, fr) = (x_name, f_name);
        match m {
            Add => write!(f, "{m} {}, {}, {}", x(self.rd), x(self.rs1), x(self.rs2)),
            Addi | Slli => write!(f, "{m} {}, {}, {}", x(self.rd), x(self.rs1), self.imm),
            Lui | Auipc => write!(f, "{m} {}, {:#x}", x(self.rd), (self.imm >> 12) & 0xF_FFFF),
            Jal => write!(f, "{m} {}, {}", x(self.rd), self.imm),
            Beq | Bne | Blt | Bge => {
                write!(f, "{m} {}, {}, {}", x(self.rs1), x(self.rs2), self.imm)
            }
            Lw | Ld => write!(f, "{m} {}, {}({})", x(self.rd), self.imm, x(self.rs1)),
            Flw => write!(f, "{m} {}, {}({})", fr(self.rd), self.imm, x(self.rs1)),
            Sw | Sd => write!(f, "{m} {}, {}({})", x(self.rs2), self.imm, x(self.rs1)),
            Fsw => write!(f, "{m} {}, {}({})", fr(self.rs2), self.imm, x(self.rs1)),
            FaddS | FmulS => {
                write!(f, "{m} {}, {}, {}", fr(self.rd), fr(self.rs1), fr(self.rs2))?;
                write_rm(f, self.rm)
            }
            FmacS => {
                write!(f, "{m} {}, {}, {}", fr(self.rd), fr(self.rs1), fr(self.rs2))?;
                write_rm(f, self.rm)
            }
            RfmacS => {
                write!(f, "{m} {}, {}", fr(self.rs1), fr(self.rs2))?;
                write_rm(f, self.rm)
            }
            RfsmacS => {
                write!(f, "{m} {}", fr(self.rd))?;
                write_rm(f, self.rm)
            }
            Ebreak => write!(f, "{m}"),
        }
    }
}

fn write_rm(f: &mut fmt::Formatter<'_>, rm: u8) -> fmt::Result {
    match rm {
        RM_DYN => Ok(()),
        RM_RNE => f.write_str(", rne"),
        other => write!(f, ", rm{other}"),
    }
}

//! Two-pass assembler and label-synthesizing disassembler.
//!
//! The dialect is deliberately small: one instruction per line, optional
//! `label:` prefixes, `#` comments, decimal or `0x` immediates, ABI or
//! numeric register names, and `j label` as the only pseudo-instruction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::isa::{self, DecodedInstruction, FormatClass, IsaError, Mnemonic, RM_DYN, RM_RNE};

/// Binary image magic, followed by the base address as a little-endian u64.
pub const IMAGE_MAGIC: &[u8; 8] = b"RPIPEIMG";
pub const IMAGE_HEADER_BYTES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown mnemonic `{name}`")]
    UnknownMnemonic { line: usize, name: String },
    #[error("line {line}: undefined label `{label}`")]
    UndefinedLabel { line: usize, label: String },
    #[error("line {line}: label `{label}` defined twice")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: branch target {target:#x} outside the image")]
    TargetOutsideImage { line: usize, target: u64 },
    #[error("line {line}: {source}")]
    Encode { line: usize, source: IsaError },
    #[error("program contains no instructions")]
    Empty,
    #[error("base address {0:#x} is not 4-byte aligned")]
    MisalignedBase(u64),
    #[error("malformed image: {0}")]
    BadImage(String),
    #[error("illegal instruction {word:#010x} at offset {offset:#x}")]
    IllegalWord { offset: u64, word: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramImage {
    pub base: u64,
    pub words: Vec<u32>,
    pub symbols: BTreeMap<String, u64>,
}

impl ProgramImage {
    pub fn end(&self) -> u64 {
        self.base + 4 * self.words.len() as u64
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr < self.end() && addr % 4 == 0
    }

    pub fn word_at(&self, addr: u64) -> Option<u32> {
        self.contains(addr)
            .then(|| self.words[((addr - self.base) / 4) as usize])
    }

    /// Serialize as header (`RPIPEIMG`, base) plus little-endian words.
    /// The symbol table is not stored.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(IMAGE_HEADER_BYTES + 4 * self.words.len());
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&self.base.to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AsmError> {
        if bytes.len() < IMAGE_HEADER_BYTES || &bytes[..8] != IMAGE_MAGIC {
            return Err(AsmError::BadImage("missing RPIPEIMG header".into()));
        }
        let body = &bytes[IMAGE_HEADER_BYTES..];
        if body.len() % 4 != 0 {
            return Err(AsmError::BadImage(format!(
                "body length {} is not a multiple of 4",
                body.len()
            )));
        }
        if body.is_empty() {
            return Err(AsmError::Empty);
        }
        let base = u64::from_le_bytes(bytes[8..16].try_into().expect("8-byte slice"));
        if base % 4 != 0 {
            return Err(AsmError::MisalignedBase(base));
        }
        let words = body
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        Ok(ProgramImage {
            base,
            words,
            symbols: BTreeMap::new(),
        })
    }

    /// Decode every word; used by the simulators to avoid re-decoding on
    /// each fetch.
    pub fn decode_all(&self) -> Result<Vec<DecodedInstruction>, AsmError> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                isa::decode(w).map_err(|_| AsmError::IllegalWord {
                    offset: 4 * i as u64,
                    word: w,
                })
            })
            .collect()
    }
}

struct ParsedLine<'a> {
    line: usize,
    mnemonic: &'a str,
    operands: Vec<&'a str>,
}

fn is_label_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$')
}

fn parse_int(text: &str) -> Option<i64> {
    let (neg, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let value = if let Some(hex) = digits.strip_prefix("0x").or_else(|| digits.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        if !digits.chars().all(|c| c.is_ascii_digit()) || digits.is_empty() {
            return None;
        }
        digits.parse::<i64>().ok()?
    };
    Some(if neg { -value } else { value })
}

/// Translate assembly source to an image based at `base`.
pub fn assemble(source: &str, base: u64) -> Result<ProgramImage, AsmError> {
    if base % 4 != 0 {
        return Err(AsmError::MisalignedBase(base));
    }
    let mut symbols = BTreeMap::new();
    let mut label_lines = HashMap::new();
    let mut lines = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let mut text = raw.split('#').next().unwrap_or("").trim();
        while let Some(colon) = text.find(':') {
            let label = text[..colon].trim();
            if !is_label_name(label) {
                break;
            }
            let addr = base + 4 * lines.len() as u64;
            if symbols.insert(label.to_string(), addr).is_some() {
                return Err(AsmError::DuplicateLabel {
                    line,
                    label: label.to_string(),
                });
            }
            label_lines.insert(label.to_string(), line);
            text = text[colon + 1..].trim();
        }
        if text.is_empty() {
            continue;
        }
        let (mnemonic, rest) = match text.find(char::is_whitespace) {
            Some(sp) => (&text[..sp], text[sp..].trim()),
            None => (text, ""),
        };
        let operands = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(str::trim).collect()
        };
        lines.push(ParsedLine {
            line,
            mnemonic,
            operands,
        });
    }
    if lines.is_empty() {
        return Err(AsmError::Empty);
    }

    let end = base + 4 * lines.len() as u64;
    let mut words = Vec::with_capacity(lines.len());
    for (i, pl) in lines.iter().enumerate() {
        let pc = base + 4 * i as u64;
        let instr = parse_instruction(pl, pc, &symbols, base, end)?;
        let word = isa::encode(&instr).map_err(|source| AsmError::Encode {
            line: pl.line,
            source,
        })?;
        words.push(word);
    }
    Ok(ProgramImage {
        base,
        words,
        symbols,
    })
}

fn parse_instruction(
    pl: &ParsedLine<'_>,
    pc: u64,
    symbols: &BTreeMap<String, u64>,
    base: u64,
    end: u64,
) -> Result<DecodedInstruction, AsmError> {
    let line = pl.line;
    let syntax = |msg: String| AsmError::Syntax { line, msg };
    let ops = &pl.operands;
    let want = |n: usize| -> Result<(), AsmError> {
        if ops.len() != n {
            return Err(syntax(format!(
                "`{}` takes {n} operand(s), got {}",
                pl.mnemonic,
                ops.len()
            )));
        }
        Ok(())
    };
    let xreg = |s: &str| isa::parse_x(s).ok_or_else(|| syntax(format!("bad integer register `{s}`")));
    let freg = |s: &str| isa::parse_f(s).ok_or_else(|| syntax(format!("bad FP register `{s}`")));
    let imm = |s: &str| parse_int(s).ok_or_else(|| syntax(format!("bad immediate `{s}`")));
    let target = |s: &str| -> Result<i64, AsmError> {
        let addr = match parse_int(s) {
            Some(off) => pc.wrapping_add(off as u64),
            None => *symbols.get(s).ok_or_else(|| AsmError::UndefinedLabel {
                line,
                label: s.to_string(),
            })?,
        };
        if addr < base || addr >= end || addr % 4 != 0 {
            return Err(AsmError::TargetOutsideImage { line, target: addr });
        }
        Ok(addr.wrapping_sub(pc) as i64)
    };
    let mem_operand = |s: &str| -> Result<(i64, u8), AsmError> {
        let open = s
            .find('(')
            .filter(|_| s.ends_with(')'))
            .ok_or_else(|| syntax(format!("expected `offset(reg)`, got `{s}`")))?;
        let off = s[..open].trim();
        let off = if off.is_empty() { 0 } else { imm(off)? };
        Ok((off, xreg(s[open + 1..s.len() - 1].trim())?))
    };
    let rounding = |extra: Option<&&str>| -> Result<u8, AsmError> {
        match extra.copied() {
            None | Some("dyn") => Ok(RM_DYN),
            Some("rne") => Ok(RM_RNE),
            Some(other) => Err(AsmError::Encode {
                line,
                source: IsaError::UnsupportedRoundingMode(match other {
                    "rtz" => 1,
                    "rdn" => 2,
                    "rup" => 3,
                    "rmm" => 4,
                    _ => return Err(syntax(format!("bad rounding mode `{other}`"))),
                }),
            }),
        }
    };

    if pl.mnemonic == "j" {
        want(1)?;
        return Ok(DecodedInstruction::u(Mnemonic::Jal, 0, target(ops[0])?));
    }
    let m = Mnemonic::parse(pl.mnemonic).ok_or_else(|| AsmError::UnknownMnemonic {
        line,
        name: pl.mnemonic.to_string(),
    })?;
    use Mnemonic::*;
    let instr = match m {
        Add => {
            want(3)?;
            DecodedInstruction::r(m, xreg(ops[0])?, xreg(ops[1])?, xreg(ops[2])?)
        }
        Addi | Slli => {
            want(3)?;
            DecodedInstruction::i(m, xreg(ops[0])?, xreg(ops[1])?, imm(ops[2])?)
        }
        Lui | Auipc => {
            want(2)?;
            let field = imm(ops[1])?;
            if !(-(1 << 19)..(1 << 20)).contains(&field) {
                return Err(AsmError::Encode {
                    line,
                    source: IsaError::ImmediateOutOfRange { mnemonic: m, imm: field },
                });
            }
            let value = (((field as u32) & 0xF_FFFF) << 12) as i32 as i64;
            DecodedInstruction::u(m, xreg(ops[0])?, value)
        }
        Jal => match ops.len() {
            1 => DecodedInstruction::u(m, 1, target(ops[0])?),
            _ => {
                want(2)?;
                DecodedInstruction::u(m, xreg(ops[0])?, target(ops[1])?)
            }
        },
        Beq | Bne | Blt | Bge => {
            want(3)?;
            DecodedInstruction::s(m, xreg(ops[0])?, xreg(ops[1])?, target(ops[2])?)
        }
        Lw | Ld => {
            want(2)?;
            let (off, rs1) = mem_operand(ops[1])?;
            DecodedInstruction::i(m, xreg(ops[0])?, rs1, off)
        }
        Flw => {
            want(2)?;
            let (off, rs1) = mem_operand(ops[1])?;
            DecodedInstruction::i(m, freg(ops[0])?, rs1, off)
        }
        Sw | Sd => {
            want(2)?;
            let (off, rs1) = mem_operand(ops[1])?;
            DecodedInstruction::s(m, rs1, xreg(ops[0])?, off)
        }
        Fsw => {
            want(2)?;
            let (off, rs1) = mem_operand(ops[1])?;
            DecodedInstruction::s(m, rs1, freg(ops[0])?, off)
        }
        FaddS | FmulS | FmacS => {
            if ops.len() != 3 && ops.len() != 4 {
                want(3)?;
            }
            let mut d = DecodedInstruction::fp(m, freg(ops[0])?, freg(ops[1])?, freg(ops[2])?);
            d.rm = rounding(ops.get(3))?;
            d
        }
        RfmacS => {
            if ops.len() != 2 && ops.len() != 3 {
                want(2)?;
            }
            let mut d = DecodedInstruction::fp(m, 0, freg(ops[0])?, freg(ops[1])?);
            d.rm = rounding(ops.get(2))?;
            d
        }
        RfsmacS => {
            if ops.len() != 1 && ops.len() != 2 {
                want(1)?;
            }
            let mut d = DecodedInstruction::fp(m, freg(ops[0])?, 0, 0);
            d.rm = rounding(ops.get(1))?;
            d
        }
        Ebreak => {
            want(0)?;
            DecodedInstruction::ebreak()
        }
    };
    Ok(instr)
}

/// Render an image as assembly that [`assemble`] maps back to the same
/// words. In-image branch/jump targets get labels, reusing the image's
/// symbol names where available.
pub fn disassemble(image: &ProgramImage) -> Result<String, AsmError> {
    let decoded = image.decode_all()?;
    let target_of = |i: usize, d: &DecodedInstruction| -> Option<u64> {
        let pc = image.base + 4 * i as u64;
        matches!(d.mnemonic.format(), FormatClass::B | FormatClass::J)
            .then(|| pc.wrapping_add(d.imm as u64))
            .filter(|&t| image.contains(t))
    };

    let targets: BTreeSet<u64> = decoded
        .iter()
        .enumerate()
        .filter_map(|(i, d)| target_of(i, d))
        .collect();
    let mut names: BTreeMap<u64, String> = BTreeMap::new();
    for (name, &addr) in &image.symbols {
        names.entry(addr).or_insert_with(|| name.clone());
    }
    for &t in &targets {
        names.entry(t).or_insert_with(|| format!("L_{t:x}"));
    }

    let mut out = String::new();
    for (i, d) in decoded.iter().enumerate() {
        let pc = image.base + 4 * i as u64;
        if let Some(name) = names.get(&pc) {
            let _ = writeln!(out, "{name}:");
        }
        let text = match target_of(i, d) {
            Some(t) => {
                let label = &names[&t];
                match d.mnemonic {
                    Mnemonic::Jal if d.rd == 0 => format!("j {label}"),
                    Mnemonic::Jal => format!("jal {}, {label}", isa::x_name(d.rd)),
                    _ => format!(
                        "{} {}, {}, {label}",
                        d.mnemonic,
                        isa::x_name(d.rs1),
                        isa::x_name(d.rs2)
                    ),
                }
            }
            None => d.to_string(),
        };
        let _ = writeln!(out, "    {text}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rfmac_fields() {
        let img = assemble("rfmac.s fa5, fa4", 0x1000).unwrap();
        assert_eq!(img.words.len(), 1);
        let d = isa::decode(img.words[0]).unwrap();
        assert_eq!(d.mnemonic, Mnemonic::RfmacS);
        assert_eq!((d.rd, d.rs1, d.rs2), (0, 15, 14));
        assert!(isa::entry(Mnemonic::RfmacS).matches(img.words[0]));
    }

    #[test]
    fn self_branch_has_zero_offset() {
        let img = assemble("loop: bge a5, a4, loop", 0x1000).unwrap();
        let d = isa::decode(img.words[0]).unwrap();
        assert_eq!(d.mnemonic, Mnemonic::Bge);
        assert_eq!(d.imm, 0);
        assert_eq!(img.symbols["loop"], 0x1000);
    }

    #[test]
    fn forward_branch_over_one_instruction() {
        let src = "beq a0, a1, skip\naddi a0, a0, 1\nskip: ebreak\n";
        let img = assemble(src, 0x1000).unwrap();
        // B-type imm=8: imm[4:1]=0b0100 -> bits 11:8, everything else 0.
        // rs2=a1(11), rs1=a0(10), funct3=000, opcode 0x63.
        assert_eq!(img.words[0], (11 << 20) | (10 << 15) | (0b0100 << 8) | 0x63);
        assert_eq!(isa::decode(img.words[0]).unwrap().imm, 8);
        let text = disassemble(&img).unwrap();
        assert_eq!(assemble(&text, 0x1000).unwrap().words, img.words);
    }

    #[test]
    fn disassembly_renders_custom_ops() {
        let img = assemble("rfsmac.s fa5\nfsw fa5, 0(a5)\nebreak", 0x2000).unwrap();
        let text = disassemble(&img).unwrap();
        assert!(text.contains("rfsmac.s fa5"), "{text}");
        assert!(text.contains("fsw fa5, 0(a5)"), "{text}");
    }

    #[test]
    fn zero_word_reports_offset() {
        let img = ProgramImage {
            base: 0x1000,
            words: vec![0],
            symbols: BTreeMap::new(),
        };
        assert_eq!(
            disassemble(&img),
            Err(AsmError::IllegalWord { offset: 0, word: 0 })
        );
        let img = ProgramImage {
            base: 0x1000,
            words: vec![0x13, 0x13, 0xFFFF_FFFF],
            symbols: BTreeMap::new(),
        };
        assert!(matches!(disassemble(&img), Err(AsmError::IllegalWord { offset: 8, .. })));
    }

    #[test]
    fn label_errors() {
        assert!(matches!(
            assemble("j nowhere", 0),
            Err(AsmError::UndefinedLabel { line: 1, .. })
        ));
        assert!(matches!(
            assemble("a: ebreak\na: ebreak", 0),
            Err(AsmError::DuplicateLabel { line: 2, .. })
        ));
        assert!(matches!(
            assemble("frob a0", 0),
            Err(AsmError::UnknownMnemonic { .. })
        ));
        assert!(matches!(
            assemble("beq a0, a0, 64\nebreak", 0),
            Err(AsmError::TargetOutsideImage { .. })
        ));
        assert_eq!(assemble("# nothing\n\n", 0), Err(AsmError::Empty));
    }

    #[test]
    fn branch_offset_out_of_range() {
        let mut src = String::from("top: addi a0, a0, 1\n");
        for _ in 0..1100 {
            src.push_str("addi a1, a1, 1\n");
        }
        src.push_str("blt a0, a1, top\nebreak\n");
        assert!(matches!(
            assemble(&src, 0x1000),
            Err(AsmError::Encode {
                source: IsaError::ImmediateOutOfRange { .. },
                ..
            })
        ));
    }

    #[test]
    fn operand_forms() {
        let src = "\
            start: lui t0, 0x80000   # sign-extending upper immediate
            addi t0, t0, -1
            ld s1, 8(sp)
            sd s1, (sp)
            flw ft0, -4(a0)
            fadd.s fa0, fa1, fa2, rne
            fmac.s fa5, fa4, fa3
            jal ra, start
            j start
            ebreak";
        let img = assemble(src, 0x1000).unwrap();
        let d: Vec<_> = img.decode_all().unwrap();
        assert_eq!(d[0].imm, i32::MIN as i64);
        assert_eq!(d[1].imm, -1);
        assert_eq!(d[3].imm, 0);
        assert_eq!(d[4].imm, -4);
        assert_eq!(d[5].rm, RM_RNE);
        assert_eq!(d[6].rm, RM_DYN);
        assert_eq!((d[7].rd, d[7].imm), (1, -28));
        assert_eq!((d[8].rd, d[8].imm), (0, -32));
        let text = disassemble(&img).unwrap();
        assert!(text.starts_with("start:\n"));
        assert_eq!(assemble(&text, 0x1000).unwrap().words, img.words);
    }

    #[test]
    fn image_bytes_roundtrip() {
        let img = assemble("addi a0, zero, 5\nebreak", 0x1000).unwrap();
        let bytes = img.to_bytes();
        assert_eq!(&bytes[..8], b"RPIPEIMG");
        assert_eq!(&bytes[8..16], &0x1000u64.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 8);
        let back = ProgramImage::from_bytes(&bytes).unwrap();
        assert_eq!(back.words, img.words);
        assert_eq!(back.base, 0x1000);
        assert!(ProgramImage::from_bytes(&bytes[..15]).is_err());
        assert!(ProgramImage::from_bytes(&bytes[..18]).is_err());
        assert_eq!(ProgramImage::from_bytes(&bytes[..16]), Err(AsmError::Empty));
    }
}

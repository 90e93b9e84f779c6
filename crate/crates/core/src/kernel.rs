//! Convolution kernel generator, reference convolution and layer suites.
//!
//! Every variant emits the same six-deep loop nest
//! `i (filters) / j (rows) / k (cols) / l (channels) / m / n (filter window)`
//! as do-while loops closed by `blt`, with strength-reduced pointers. Only
//! the innermost body and the per-output tail differ:
//!
//! | variant  | body per MAC                                   | per output       |
//! |----------|------------------------------------------------|------------------|
//! | RV64F    | `flw` x3, `fmul.s`, `fadd.s`, `fsw`            |                  |
//! | Baseline | `flw` x3, `fmac.s`, `fsw`                      |                  |
//! | RV64R    | `flw` x2, `rfmac.s`                            | `rfsmac.s`, `fsw` |

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::{assemble, AsmError, ProgramImage};
use crate::fpu;
use crate::isa::Mnemonic;
use crate::machine::{DataSegment, MnemonicCounts};

pub const PROGRAM_BASE: u64 = 0x1000;
pub const DATA_BASE: u64 = 0x10_0000;
const REGION_ALIGN: u64 = 64;
/// Largest constant a `lui`+`addi` pair can build without the sign
/// extension of `lui` kicking in.
const MAX_CONSTANT: u64 = (1 << 31) - 2048 - 1;
/// Constants loaded by the prologue, each with one `lui` and one `addi`.
const PROLOGUE_CONSTANTS: u64 = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid convolution geometry {spec}: {reason}")]
    Geometry { spec: ConvSpec, reason: String },
    #[error("constant {value:#x} ({what}) does not fit the 32-bit address scheme")]
    AddressOverflow { what: &'static str, value: u64 },
    #[error("tensor regions overlap or are misaligned")]
    Binding,
    #[error("{what} has {got} elements, expected {expected}")]
    Shape {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("unknown model `{0}` (expected lenet, resnet20 or mobilenetv1)")]
    UnknownModel(String),
    #[error("scale {0} is outside (0, 1]")]
    Scale(f64),
    #[error("unknown variant `{0}` (expected RV64F, Baseline or RV64R)")]
    UnknownVariant(String),
    #[error("generated kernel failed to assemble: {0}")]
    Assemble(#[from] AsmError),
}

/// Geometry of one convolution loop nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "C")]
    pub c: u32,
    #[serde(rename = "H_in")]
    pub h_in: u32,
    #[serde(rename = "W_in")]
    pub w_in: u32,
    #[serde(rename = "H_fil")]
    pub h_fil: u32,
    #[serde(rename = "W_fil")]
    pub w_fil: u32,
    #[serde(rename = "S")]
    pub s: u32,
}

impl fmt::Display for ConvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "M={} C={} H_in={} W_in={} H_fil={} W_fil={} S={}",
            self.m, self.c, self.h_in, self.w_in, self.h_fil, self.w_fil, self.s
        )
    }
}

impl ConvSpec {
    pub const fn new(m: u32, c: u32, h_in: u32, w_in: u32, h_fil: u32, w_fil: u32, s: u32) -> Self {
        ConvSpec {
            m,
            c,
            h_in,
            w_in,
            h_fil,
            w_fil,
            s,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |reason: &str| {
            Err(KernelError::Geometry {
                spec: *self,
                reason: reason.to_string(),
            })
        };
        let fields = [self.m, self.c, self.h_in, self.w_in, self.h_fil, self.w_fil, self.s];
        if fields.contains(&0) {
            return bad("all fields must be positive");
        }
        if self.h_fil > self.h_in || self.w_fil > self.w_in {
            return bad("filter larger than input");
        }
        Ok(())
    }

    /// Full-resolution output height `H_in - H_fil + 1`.
    pub fn h(&self) -> u32 {
        self.h_in - self.h_fil + 1
    }

    pub fn w(&self) -> u32 {
        self.w_in - self.w_fil + 1
    }

    /// Stored output height, `ceil(H / S)`.
    pub fn h_out(&self) -> u32 {
        self.h().div_ceil(self.s)
    }

    pub fn w_out(&self) -> u32 {
        self.w().div_ceil(self.s)
    }

    pub fn input_len(&self) -> usize {
        self.c as usize * self.h_in as usize * self.w_in as usize
    }

    pub fn filter_len(&self) -> usize {
        self.m as usize * self.c as usize * self.h_fil as usize * self.w_fil as usize
    }

    pub fn output_len(&self) -> usize {
        self.m as usize * self.h_out() as usize * self.w_out() as usize
    }

    pub fn macs(&self) -> u64 {
        self.output_len() as u64 * self.c as u64 * self.h_fil as u64 * self.w_fil as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    RV64F,
    Baseline,
    RV64R,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::RV64F, Variant::Baseline, Variant::RV64R];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::RV64F => "RV64F",
            Variant::Baseline => "Baseline",
            Variant::RV64R => "RV64R",
        }
    }

    /// Instructions in the innermost loop body (without loop overhead).
    pub fn body(self) -> &'static [Mnemonic] {
        use Mnemonic::*;
        match self {
            Variant::RV64F => &[Flw, Flw, Flw, FmulS, FaddS, Fsw],
            Variant::Baseline => &[Flw, Flw, Flw, FmacS, Fsw],
            Variant::RV64R => &[Flw, Flw, RfmacS],
        }
    }

    /// Loads and stores per MAC in the innermost body.
    pub fn mem_per_mac(self) -> u64 {
        self.body().iter().filter(|m| m.is_mem_type()).count() as u64
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| KernelError::UnknownVariant(s.to_string()))
    }
}

/// Where the three tensors live in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorBinding {
    pub input: u64,
    pub filter: u64,
    pub output: u64,
}

fn align_up(x: u64) -> u64 {
    x.div_ceil(REGION_ALIGN) * REGION_ALIGN
}

impl TensorBinding {
    /// Input, filter and output placed back to back from `base`.
    pub fn packed(spec: &ConvSpec, base: u64) -> Self {
        let input = align_up(base);
        let filter = align_up(input + 4 * spec.input_len() as u64);
        let output = align_up(filter + 4 * spec.filter_len() as u64);
        TensorBinding {
            input,
            filter,
            output,
        }
    }

    pub fn validate(&self, spec: &ConvSpec) -> Result<(), KernelError> {
        let mut regions = [
            (self.input, 4 * spec.input_len() as u64),
            (self.filter, 4 * spec.filter_len() as u64),
            (self.output, 4 * spec.output_len() as u64),
        ];
        if regions.iter().any(|&(a, _)| a % 4 != 0) {
            return Err(KernelError::Binding);
        }
        regions.sort();
        if regions.windows(2).any(|w| w[0].0 + w[0].1 > w[1].0) {
            return Err(KernelError::Binding);
        }
        Ok(())
    }

    pub fn end(&self, spec: &ConvSpec) -> u64 {
        [
            self.input + 4 * spec.input_len() as u64,
            self.filter + 4 * spec.filter_len() as u64,
            self.output + 4 * spec.output_len() as u64,
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }
}

fn materialize(src: &mut String, reg: &str, what: &'static str, value: u64) -> Result<(), KernelError> {
    if value > MAX_CONSTANT {
        return Err(KernelError::AddressOverflow { what, value });
    }
    let hi = (value + 0x800) >> 12;
    let lo = value as i64 - (hi << 12) as i64;
    let _ = writeln!(src, "    lui {reg}, {hi:#x}");
    let _ = writeln!(src, "    addi {reg}, {reg}, {lo}");
    Ok(())
}

/// Emit the assembly for one convolution.
pub fn gen_conv(variant: Variant, spec: &ConvSpec, bind: &TensorBinding) -> Result<String, KernelError> {
    spec.validate()?;
    bind.validate(spec)?;
    let end = bind.end(spec);
    if end > MAX_CONSTANT {
        return Err(KernelError::AddressOverflow {
            what: "tensor end",
            value: end,
        });
    }
    let (s, w_in) = (spec.s as u64, spec.w_in as u64);

    let mut src = String::new();
    let _ = writeln!(src, "# {variant} conv {spec}");
    let constants: [(&str, &'static str, u64); PROLOGUE_CONSTANTS as usize] = [
        ("s1", "M", spec.m as u64),
        ("s3", "H", spec.h() as u64),
        ("s5", "W", spec.w() as u64),
        ("s7", "C", spec.c as u64),
        ("s9", "H_fil", spec.h_fil as u64),
        ("s11", "W_fil", spec.w_fil as u64),
        ("t0", "row step", 4 * s * w_in),
        ("t1", "column step", 4 * s),
        ("t2", "channel stride", 4 * spec.h_in as u64 * w_in),
        ("t3", "row stride", 4 * w_in),
        ("t5", "stride", s),
        ("a0", "output", bind.output),
        ("a1", "filter", bind.filter),
        ("t4", "input", bind.input),
    ];
    for (reg, what, value) in constants {
        materialize(&mut src, reg, what, value)?;
    }

    let body = match variant {
        Variant::RV64F => {
            "    flw fa4, 0(a0)\n    flw fa3, 0(a7)\n    flw fa5, 0(a2)\n    fmul.s fa5, fa3, fa5\n    fadd.s fa5, fa4, fa5\n    fsw fa5, 0(a0)\n"
        }
        Variant::Baseline => {
            "    flw fa4, 0(a7)\n    flw fa3, 0(a2)\n    flw fa5, 0(a0)\n    fmac.s fa5, fa4, fa3\n    fsw fa5, 0(a0)\n"
        }
        Variant::RV64R => "    flw fa5, 0(a7)\n    flw fa4, 0(a2)\n    rfmac.s fa5, fa4\n",
    };
    let drain = match variant {
        Variant::RV64R => "    rfsmac.s fa5\n    fsw fa5, 0(a0)\n",
        _ => "",
    };

    src.push_str("    addi s0, zero, 0\n");
    src.push_str(".Li:\n    addi s2, zero, 0\n    add a4, t4, zero\n");
    src.push_str(".Lj:\n    addi s4, zero, 0\n    add a3, a4, zero\n");
    src.push_str(".Lk:\n    add a2, a1, zero\n    add a5, a3, zero\n    addi s6, zero, 0\n");
    src.push_str(".Ll:\n    add a6, a5, zero\n    addi s8, zero, 0\n");
    src.push_str(".Lm:\n    add a7, a6, zero\n    addi s10, zero, 0\n");
    src.push_str(".Ln:\n");
    src.push_str(body);
    src.push_str("    addi a7, a7, 4\n    addi a2, a2, 4\n    addi s10, s10, 1\n    blt s10, s11, .Ln\n");
    src.push_str("    add a6, a6, t3\n    addi s8, s8, 1\n    blt s8, s9, .Lm\n");
    src.push_str("    add a5, a5, t2\n    addi s6, s6, 1\n    blt s6, s7, .Ll\n");
    src.push_str(drain);
    src.push_str("    addi a0, a0, 4\n    add a3, a3, t1\n    add s4, s4, t5\n    blt s4, s5, .Lk\n");
    src.push_str("    add a4, a4, t0\n    add s2, s2, t5\n    blt s2, s3, .Lj\n");
    src.push_str("    add a1, a2, zero\n    addi s0, s0, 1\n    blt s0, s1, .Li\n");
    src.push_str("    ebreak\n");
    Ok(src)
}

/// Retired-instruction prediction for a generated kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub ic: u64,
    pub mem_type: u64,
    pub taken_branches: u64,
    pub per_mnemonic: MnemonicCounts,
}

/// Closed-form retired counts for `gen_conv(variant, spec, _)`.
pub fn expected_counts(variant: Variant, spec: &ConvSpec) -> ExpectedCounts {
    use Mnemonic::*;
    let i_iters = spec.m as u64;
    let j_iters = i_iters * spec.h_out() as u64;
    let k_iters = spec.output_len() as u64;
    let l_iters = k_iters * spec.c as u64;
    let m_iters = l_iters * spec.h_fil as u64;
    let n_iters = spec.macs();

    let mut c = MnemonicCounts::default();
    c.add(Lui, PROLOGUE_CONSTANTS);
    c.add(Addi, PROLOGUE_CONSTANTS + 1);
    // loop heads
    c.add(Addi, i_iters + j_iters + k_iters + l_iters + m_iters);
    c.add(Add, i_iters + j_iters + 2 * k_iters + l_iters + m_iters);
    // loop tails
    c.add(Addi, 3 * n_iters + m_iters + l_iters + k_iters + i_iters);
    c.add(Add, m_iters + l_iters + 2 * k_iters + 2 * j_iters + i_iters);
    c.add(Blt, n_iters + m_iters + l_iters + k_iters + j_iters + i_iters);
    for &op in variant.body() {
        c.add(op, n_iters);
    }
    if variant == Variant::RV64R {
        c.add(RfsmacS, k_iters);
        c.add(Fsw, k_iters);
    }
    c.add(Ebreak, 1);

    // every loop closes with one fall-through per entry
    let taken = (n_iters - m_iters) + (m_iters - l_iters) + (l_iters - k_iters)
        + (k_iters - j_iters)
        + (j_iters - i_iters)
        + (i_iters - 1);
    ExpectedCounts {
        ic: c.total(),
        mem_type: c.mem_type(),
        taken_branches: taken,
        per_mnemonic: c,
    }
}

/// Reference convolution in the kernels' accumulation order: for every
/// output, `acc = +0` then `acc += in * f` over `l`, `m`, `n`, rounding the
/// product and the sum separately. Tensors are raw f32 bits.
pub fn conv_ref(input: &[u32], filter: &[u32], spec: &ConvSpec) -> Result<Vec<u32>, KernelError> {
    spec.validate()?;
    if input.len() != spec.input_len() {
        return Err(KernelError::Shape {
            what: "input",
            got: input.len(),
            expected: spec.input_len(),
        });
    }
    if filter.len() != spec.filter_len() {
        return Err(KernelError::Shape {
            what: "filter",
            got: filter.len(),
            expected: spec.filter_len(),
        });
    }
    let (c, h_in, w_in) = (spec.c as usize, spec.h_in as usize, spec.w_in as usize);
    let (hf, wf, s) = (spec.h_fil as usize, spec.w_fil as usize, spec.s as usize);
    let mut out = Vec::with_capacity(spec.output_len());
    for i in 0..spec.m as usize {
        let filt = &filter[i * c * hf * wf..(i + 1) * c * hf * wf];
        for j in (0..spec.h() as usize).step_by(s) {
            for k in (0..spec.w() as usize).step_by(s) {
                let mut acc = fpu::POS_ZERO;
                let mut fi = filt.iter();
                for l in 0..c {
                    for m in 0..hf {
                        let row = &input[(l * h_in + j + m) * w_in + k..][..wf];
                        for (&x, &f) in row.iter().zip(fi.by_ref()) {
                            acc = fpu::add(acc, fpu::mul(x, f));
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

/// Deterministic tensor contents: uniform in `[-1, 1]`, one independent
/// stream per `(seed, stream)` pair.
pub fn random_tensor(seed: u64, stream: u64, len: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len)
        .map(|_| rng.random_range(-1.0f32..=1.0).to_bits())
        .collect()
}

/// Everything needed to simulate one convolution.
#[derive(Debug, Clone)]
pub struct ConvProgram {
    pub variant: Variant,
    pub spec: ConvSpec,
    pub binding: TensorBinding,
    pub source: String,
    pub image: ProgramImage,
    pub input: Vec<u32>,
    pub filter: Vec<u32>,
}

impl ConvProgram {
    /// Generate, assemble and lay out a kernel over the given tensors. The
    /// output region is zero-initialized.
    pub fn build(
        variant: Variant,
        spec: &ConvSpec,
        input: Vec<u32>,
        filter: Vec<u32>,
    ) -> Result<Self, KernelError> {
        let binding = TensorBinding::packed(spec, DATA_BASE);
        let source = gen_conv(variant, spec, &binding)?;
        let image = assemble(&source, PROGRAM_BASE)?;
        if input.len() != spec.input_len() || filter.len() != spec.filter_len() {
            return Err(KernelError::Shape {
                what: "tensor",
                got: input.len() + filter.len(),
                expected: spec.input_len() + spec.filter_len(),
            });
        }
        Ok(ConvProgram {
            variant,
            spec: *spec,
            binding,
            source,
            image,
            input,
            filter,
        })
    }

    /// Build with tensors drawn from [`random_tensor`].
    pub fn random(variant: Variant, spec: &ConvSpec, seed: u64, stream: u64) -> Result<Self, KernelError> {
        spec.validate()?;
        let input = random_tensor(seed, 2 * stream, spec.input_len());
        let filter = random_tensor(seed, 2 * stream + 1, spec.filter_len());
        Self::build(variant, spec, input, filter)
    }

    pub fn data(&self) -> Vec<DataSegment> {
        vec![
            DataSegment::from_f32_bits(self.binding.input, &self.input),
            DataSegment::from_f32_bits(self.binding.filter, &self.filter),
            DataSegment::from_f32_bits(self.binding.output, &vec![0; self.spec.output_len()]),
        ]
    }

    pub fn reference(&self) -> Vec<u32> {
        conv_ref(&self.input, &self.filter, &self.spec).expect("shapes checked at build")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Lenet,
    Resnet20,
    Mobilenetv1,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Lenet, Model::Resnet20, Model::Mobilenetv1];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Lenet => "lenet",
            Model::Resnet20 => "resnet20",
            Model::Mobilenetv1 => "mobilenetv1",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Model::Lenet => "LeNet",
            Model::Resnet20 => "ResNet-20",
            Model::Mobilenetv1 => "MobileNet-V1",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Model::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| KernelError::UnknownModel(s.to_string()))
    }
}

/// One network layer. Grouped (depthwise) layers run `groups` independent
/// copies of `spec`, each over its own slice of channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub spec: ConvSpec,
    #[serde(default = "one")]
    pub groups: u32,
}

fn one() -> u32 {
    1
}

impl LayerSpec {
    pub fn macs(&self) -> u64 {
        self.spec.macs() * self.groups as u64
    }
}

fn scaled(ch: u32, scale: f64) -> u32 {
    ((ch as f64 * scale - 1e-9).ceil() as u32).max(1)
}

/// Convolution layers of `model` with channel counts multiplied by `scale`
/// and rounded up. Inputs are pre-padded, so `H_in` includes the border.
pub fn model_layers(model: Model, scale: f64) -> Result<Vec<LayerSpec>, KernelError> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(KernelError::Scale(scale));
    }
    let ch = |c: u32| scaled(c, scale);
    let conv = |name: String, m: u32, c: u32, h_in: u32, k: u32, s: u32| LayerSpec {
        name,
        spec: ConvSpec::new(ch(m), ch(c), h_in, h_in, k, k, s),
        groups: 1,
    };
    let mut layers = Vec::new();
    match model {
        Model::Lenet => {
            layers.push(conv("C1".into(), 6, 1, 32, 5, 1));
            layers.push(conv("C3".into(), 16, 6, 14, 5, 1));
            layers.push(conv("C5".into(), 120, 16, 5, 5, 1));
        }
        Model::Resnet20 => {
            layers.push(conv("conv1".into(), 16, 3, 34, 3, 1));
            let stages = [(16, 34, 34), (32, 34, 18), (64, 18, 10)];
            let mut c_in = 16;
            for (stage, &(width, first_in, rest_in)) in stages.iter().enumerate() {
                for idx in 0..6 {
                    let (h_in, s) = if idx == 0 { (first_in, if stage == 0 { 1 } else { 2 }) } else { (rest_in, 1) };
                    let name = format!("stage{}.block{}.conv{}", stage + 1, idx / 2 + 1, idx % 2 + 1);
                    layers.push(conv(name, width, c_in, h_in, 3, s));
                    c_in = width;
                }
            }
        }
        Model::Mobilenetv1 => {
            layers.push(conv("conv1".into(), 32, 3, 225, 3, 2));
            // (input channels, output channels, input size, depthwise stride)
            let blocks: [(u32, u32, u32, u32); 13] = [
                (32, 64, 112, 1),
                (64, 128, 112, 2),
                (128, 128, 56, 1),
                (128, 256, 56, 2),
                (256, 256, 28, 1),
                (256, 512, 28, 2),
                (512, 512, 14, 1),
                (512, 512, 14, 1),
                (512, 512, 14, 1),
                (512, 512, 14, 1),
                (512, 512, 14, 1),
                (512, 1024, 14, 2),
                (1024, 1024, 7, 1),
            ];
            for (b, &(c_in, c_out, size, s)) in blocks.iter().enumerate() {
                let (padded, out) = if s == 1 { (size + 2, size) } else { (size + 1, size / 2) };
                layers.push(LayerSpec {
                    name: format!("dw{}", b + 1),
                    spec: ConvSpec::new(1, 1, padded, padded, 3, 3, s),
                    groups: ch(c_in),
                });
                layers.push(conv(format!("pw{}", b + 1), c_out, c_in, out, 1, 1));
            }
        }
    }
    Ok(layers)
}

/// JSON view of a model's layer table.
pub fn layers_json(model: Model, scale: f64) -> Result<serde_json::Value, KernelError> {
    let layers = model_layers(model, scale)?;
    Ok(serde_json::json!({
        "model": model.as_str(),
        "scale": scale,
        "layers": layers,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry() {
        let s = ConvSpec::new(2, 3, 6, 6, 3, 3, 1);
        assert_eq!((s.h(), s.w()), (4, 4));
        assert_eq!(s.macs(), 864);
        let s = ConvSpec::new(1, 1, 225, 225, 3, 3, 2);
        assert_eq!(s.h_out(), 112);
        assert!(ConvSpec::new(1, 1, 2, 2, 3, 1, 1).validate().is_err());
        assert!(ConvSpec::new(1, 0, 2, 2, 1, 1, 1).validate().is_err());
    }

    #[test]
    fn binding_is_disjoint_and_aligned() {
        let s = ConvSpec::new(3, 2, 7, 5, 2, 2, 2);
        let b = TensorBinding::packed(&s, DATA_BASE);
        b.validate(&s).unwrap();
        assert_eq!(b.filter % 64, 0);
        let bad = TensorBinding {
            output: b.filter,
            ..b
        };
        assert_eq!(bad.validate(&s), Err(KernelError::Binding));
    }

    #[test]
    fn body_mixes() {
        assert_eq!(Variant::RV64F.mem_per_mac(), 4);
        assert_eq!(Variant::Baseline.mem_per_mac(), 4);
        assert_eq!(Variant::Baseline.body().len(), 5);
        assert_eq!(Variant::RV64R.mem_per_mac(), 2);
    }

    #[test]
    fn reference_identity_and_zero() {
        let s = ConvSpec::new(1, 1, 3, 3, 1, 1, 1);
        let input: Vec<u32> = (1..=9).map(|v| (v as f32).to_bits()).collect();
        assert_eq!(conv_ref(&input, &[1f32.to_bits()], &s).unwrap(), input);
        assert!(conv_ref(&input, &[0], &s).unwrap().iter().all(|&v| v == 0));
        assert!(conv_ref(&input[1..], &[0], &s).is_err());
    }

    #[test]
    fn generated_kernel_assembles() {
        let s = ConvSpec::new(2, 3, 6, 6, 3, 3, 1);
        for v in Variant::ALL {
            let p = ConvProgram::random(v, &s, 1, 0).unwrap();
            assert!(p.image.words.len() > 30);
            let rfmacs = p.source.matches("rfmac.s").count();
            assert_eq!(rfmacs, (v == Variant::RV64R) as usize);
        }
    }

    #[test]
    fn oversized_geometry_is_rejected() {
        let s = ConvSpec::new(1, 1 << 12, 1 << 10, 1 << 10, 1, 1, 1);
        let b = TensorBinding::packed(&s, DATA_BASE);
        assert!(matches!(
            gen_conv(Variant::RV64R, &s, &b),
            Err(KernelError::AddressOverflow { .. })
        ));
    }

    #[test]
    fn model_tables() {
        let lenet = model_layers(Model::Lenet, 1.0).unwrap();
        assert_eq!(lenet[0].spec, ConvSpec::new(6, 1, 32, 32, 5, 5, 1));
        let resnet = model_layers(Model::Resnet20, 1.0).unwrap();
        assert_eq!(resnet.len(), 19);
        assert!(resnet.iter().all(|l| l.spec.h_fil == 3 && l.spec.w_fil == 3));
        assert_eq!(resnet.last().unwrap().spec.h_out(), 8);
        let mobile = model_layers(Model::Mobilenetv1, 1.0).unwrap();
        assert_eq!(mobile.len(), 27);
        assert_eq!(mobile.last().unwrap().spec.h_out(), 7);
        assert_eq!(mobile[mobile.len() - 2].groups, 1024);
        let eighth = model_layers(Model::Resnet20, 0.125).unwrap();
        assert_eq!(eighth[0].spec.c, 1);
        assert_eq!(eighth[1].spec.m, 2);
        assert!(model_layers(Model::Lenet, 0.0).is_err());
        assert_eq!("MobileNet-V1".parse::<Model>().unwrap(), Model::Mobilenetv1);
        assert!("vgg".parse::<Model>().is_err());
    }

    #[test]
    fn random_tensors_are_deterministic_and_bounded() {
        let a = random_tensor(7, 3, 100);
        assert_eq!(a, random_tensor(7, 3, 100));
        assert_ne!(a, random_tensor(7, 4, 100));
        assert!(a.iter().all(|&v| f32::from_bits(v).abs() <= 1.0));
    }
}

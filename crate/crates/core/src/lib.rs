//! A five-stage in-order RISC-V pipeline simulator with a rented-pipeline
//! multiply-accumulate extension, plus the assembler, convolution kernel
//! generator and benchmark harness built around it.

pub mod asm;
pub mod bench;
pub mod fpu;
pub mod isa;
pub mod kernel;
pub mod machine;
pub mod mem;
pub mod pipeline;

pub use asm::{assemble, disassemble, AsmError, ProgramImage};
pub use isa::{decode, encode, registry, DecodedInstruction, EncodingEntry, IsaError, Mnemonic};
pub use machine::{exec_functional, DataSegment, MachineState, MnemonicCounts, SimError};
pub use mem::{CacheConfig, CacheStats, MainMemoryConfig};
pub use pipeline::{run, Pipeline, RunStats, SimConfig};
pub use kernel::{conv_ref, expected_counts, gen_conv, model_layers, ConvProgram, ConvSpec, LayerSpec, Model, TensorBinding, Variant};
pub use bench::{run_benchmark, BenchError, Report, ReportFormat, RunConfig};

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rentpipe::asm::{assemble, disassemble, ProgramImage};
use rentpipe::bench::{run_benchmark_traced, BenchError, ModelSelection, ReportFormat, RunConfig};
use rentpipe::isa;
use rentpipe::kernel::{gen_conv, layers_json, ConvSpec, Model, TensorBinding, Variant, DATA_BASE};
use rentpipe::machine::exec_functional;
use rentpipe::pipeline::{Pipeline, SimConfig};

#[derive(Parser)]
#[command(name = "rentpipe", version, about = "Five-stage RISC-V pipeline simulator with a rented-MEM-stage MAC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run benchmark suites and print a comparison report.
    Run(RunArgs),
    /// Assemble a source file into a program image.
    Asm {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "0x1000", value_parser = parse_u64)]
        base: u64,
    },
    /// Disassemble a program image.
    Disasm { input: PathBuf },
    /// Simulate a program image (no data segments) and print its statistics.
    Exec {
        input: PathBuf,
        /// Print the per-cycle pipeline trace.
        #[arg(long)]
        trace: bool,
        /// Preload the instruction cache and the first KiB of the data cache.
        #[arg(long)]
        warm: bool,
        #[arg(long, default_value_t = 10_000_000)]
        max_cycles: u64,
    },
    /// Emit the convolution kernel for one geometry as assembly.
    Gen {
        #[arg(long)]
        variant: Variant,
        /// M,C,H_in,W_in,H_fil,W_fil,S
        #[arg(long, value_parser = parse_spec)]
        spec: ConvSpec,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print a model's convolution layer table as JSON.
    Layers {
        model: Model,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Show the instruction encoding registry.
    Registry {
        /// Emit JSON instead of a text table.
        #[arg(long)]
        export: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Restrict to these variants (repeatable).
    #[arg(long)]
    variant: Vec<Variant>,
    /// Restrict to these models (repeatable).
    #[arg(long)]
    model: Vec<Model>,
    /// Channel scale applied to the selected models.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    format: Option<ReportFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-cycle pipeline traces (to stderr unless --trace-out is given).
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| e.to_string())
}

fn parse_spec(s: &str) -> Result<ConvSpec, String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    let [m, c, h_in, w_in, h_fil, w_fil, stride] = v[..] else {
        return Err("expected 7 comma-separated values M,C,H_in,W_in,H_fil,W_fil,S".into());
    };
    let spec = ConvSpec::new(m, c, h_in, w_in, h_fil, w_fil, stride);
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn apply_overrides(cfg: &mut RunConfig, args: &RunArgs) {
    if !args.variant.is_empty() {
        cfg.variants = args.variant.clone();
    }
    if !args.model.is_empty() {
        cfg.models = args
            .model
            .iter()
            .map(|&model| {
                let scale = cfg
                    .models
                    .iter()
                    .find(|s| s.model == model)
                    .map_or(1.0, |s| s.scale);
                ModelSelection { model, scale }
            })
            .collect();
        cfg.layers.clear();
    }
    if let Some(scale) = args.scale {
        for sel in &mut cfg.models {
            sel.scale = scale;
        }
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.clone());
    }
    cfg.trace |= args.trace;
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = RunConfig::from_json(&text)?;
    apply_overrides(&mut cfg, &args);

    let mut trace_sink: Option<Box<dyn Write>> = if cfg.trace {
        Some(match &args.trace_out {
            Some(p) => Box::new(io::BufWriter::new(
                fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(io::BufWriter::new(io::stderr())),
        })
    } else {
        None
    };
    let result = run_benchmark_traced(&cfg, trace_sink.as_deref_mut().map(|w| w as &mut dyn Write));
    if let Some(mut w) = trace_sink {
        w.flush()?;
    }
    let report = match result {
        Ok(r) => r,
        Err(e @ (BenchError::OracleMismatch { .. } | BenchError::CountMismatch { .. })) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.into()),
    };
    write_output(cfg.output.path.as_deref(), &report.render(cfg.output.format)?)?;
    Ok(ExitCode::SUCCESS)
}

fn read_image(path: &Path) -> Result<ProgramImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ProgramImage::from_bytes(&bytes)?)
}

fn cmd_exec(input: &Path, trace: bool, warm: bool, max_cycles: u64) -> Result<()> {
    let image = read_image(input)?;
    let cfg = SimConfig {
        max_cycles,
        trace,
        ..SimConfig::default()
    };
    let mut sim = Pipeline::new(&image, &[], &cfg)?;
    if warm {
        sim.warm_icache(&image);
        sim.warm_dcache(0, 1024);
    }
    let timed = sim.run_to_halt()?;
    let func = exec_functional(&image, &[], cfg.memory.size_bytes, max_cycles)?;
    if timed.state != func.state {
        bail!("timed and functional executions disagree on the final state");
    }
    let mut out = io::stdout().lock();
    for line in timed.trace.iter().flatten() {
        writeln!(out, "{line}")?;
    }
    let s = &timed.stats;
    writeln!(out, "cycles {}  retired {}  ipc {:.4}", s.cycles, s.retired, s.ipc())?;
    writeln!(
        out,
        "stalls: load-use {}  mul-use {}  apr {}  cache {}  branch flushes {}",
        s.stalls_load_use, s.stalls_mul_use, s.stalls_apr_interlock, s.stalls_cache, s.flushes_branch
    )?;
    writeln!(out, "l1i {:?}\nl1d {:?}", s.l1i, s.l1d)?;
    writeln!(out, "retired: {}", s.retired_by_mnemonic)?;
    writeln!(out, "apr {:#010x}", timed.state.apr)?;
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => return cmd_run(args),
        Command::Asm {
            input,
            output,
            base,
        } => {
            let src = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let image = assemble(&src, base)?;
            fs::write(&output, image.to_bytes())
                .with_context(|| format!("writing {}", output.display()))?;
        }
        Command::Disasm { input } => {
            let image = read_image(&input)?;
            write_output(None, &disassemble(&image)?)?;
        }
        Command::Exec {
            input,
            trace,
            warm,
            max_cycles,
        } => cmd_exec(&input, trace, warm, max_cycles)?,
        Command::Gen {
            variant,
            spec,
            output,
        } => {
            let bind = TensorBinding::packed(&spec, DATA_BASE);
            write_output(output.as_deref(), &gen_conv(variant, &spec, &bind)?)?;
        }
        Command::Layers { model, scale } => {
            let json = serde_json::to_string_pretty(&layers_json(model, scale)?)?;
            write_output(None, &(json + "\n"))?;
        }
        Command::Registry { export } => {
            let text = if export {
                serde_json::to_string_pretty(&isa::registry_json())? + "\n"
            } else {
                let mut t = String::new();
                for e in isa::registry() {
                    t += &format!("{:<10} mask {:#010x} match {:#010x} {:?}\n", e.mnemonic, e.mask, e.match_, e.format);
                }
                t
            };
            write_output(None, &text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

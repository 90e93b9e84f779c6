use proptest::prelude::*;
use rentpipe::kernel::{expected_counts, ConvProgram, ConvSpec, Variant};
use rentpipe::machine::exec_functional;
use rentpipe::mem::{CacheConfig, MainMemoryConfig};
use rentpipe::pipeline::{run, Pipeline, SimConfig};
use rentpipe::Mnemonic;

const MEM: u64 = 1 << 26;

fn config() -> SimConfig {
    SimConfig {
        memory: MainMemoryConfig {
            latency_cycles: 80,
            size_bytes: MEM,
        },
        max_cycles: 50_000_000,
        ..SimConfig::default()
    }
}

fn small_spec() -> impl Strategy<Value = ConvSpec> {
    (1u32..=4, 1u32..=4, 1u32..=8, 1u32..=8, 1u32..=4, 1u32..=4, 1u32..=3).prop_filter_map(
        "filter fits",
        |(m, c, h_in, w_in, hf, wf, s)| {
            let spec = ConvSpec::new(m, c, h_in, w_in, hf.min(h_in), wf.min(w_in), s);
            spec.validate().ok().map(|_| spec)
        },
    )
}

fn output_of(p: &ConvProgram, memory: &rentpipe::mem::Memory) -> Vec<u32> {
    memory
        .read_f32_slice(p.binding.output, p.spec.output_len())
        .unwrap()
}

#[test]
fn single_mac_gives_six() {
    let spec = ConvSpec::new(1, 1, 1, 1, 1, 1, 1);
    for v in Variant::ALL {
        let p = ConvProgram::build(v, &spec, vec![2f32.to_bits()], vec![3f32.to_bits()]).unwrap();
        let r = run(&p.image, &p.data(), &config()).unwrap();
        assert_eq!(output_of(&p, &r.memory), vec![6f32.to_bits()], "{v}");
    }
}

#[test]
fn three_channel_six_by_six_counts() {
    let spec = ConvSpec::new(2, 3, 6, 6, 3, 3, 1);
    let p = ConvProgram::random(Variant::RV64R, &spec, 5, 0).unwrap();
    let f = exec_functional(&p.image, &p.data(), MEM, 1 << 30).unwrap();
    assert_eq!(f.counts.get(Mnemonic::RfmacS), 864);
    assert_eq!(f.counts.get(Mnemonic::RfsmacS), 32);
    assert_eq!(output_of(&p, &f.memory), p.reference());
}

#[test]
fn two_filters_on_four_by_four_match_reference() {
    let spec = ConvSpec::new(2, 2, 4, 4, 2, 2, 1);
    for v in Variant::ALL {
        let p = ConvProgram::random(v, &spec, 11, 3).unwrap();
        let r = run(&p.image, &p.data(), &config()).unwrap();
        assert_eq!(output_of(&p, &r.memory), p.reference(), "{v}");
    }
}

#[test]
fn mem_traffic_ordering_per_spec() {
    let spec = ConvSpec::new(3, 2, 5, 5, 2, 3, 2);
    let mem: Vec<u64> = Variant::ALL
        .iter()
        .map(|&v| expected_counts(v, &spec).mem_type)
        .collect();
    assert!(mem[2] < mem[1] && mem[1] <= mem[0], "{mem:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn timed_functional_and_reference_agree(spec in small_spec(), seed in any::<u64>()) {
        let mut outputs = Vec::new();
        for v in Variant::ALL {
            let p = ConvProgram::random(v, &spec, seed, 0).unwrap();
            let timed = run(&p.image, &p.data(), &config()).unwrap();
            let func = exec_functional(&p.image, &p.data(), MEM, 1 << 30).unwrap();
            prop_assert_eq!(&timed.state, &func.state);
            prop_assert!(timed.memory == func.memory);
            let out = output_of(&p, &timed.memory);
            prop_assert_eq!(&out, &p.reference());
            outputs.push(out);
        }
        prop_assert_eq!(&outputs[0], &outputs[1]);
        prop_assert_eq!(&outputs[1], &outputs[2]);
    }

    #[test]
    fn retired_counts_match_closed_form(spec in small_spec(), v in 0usize..3) {
        let v = Variant::ALL[v];
        let p = ConvProgram::random(v, &spec, 1, 0).unwrap();
        let r = run(&p.image, &p.data(), &config()).unwrap();
        let e = expected_counts(v, &spec);
        prop_assert_eq!(r.stats.retired_by_mnemonic, e.per_mnemonic);
        prop_assert_eq!(r.stats.retired, e.ic);
        prop_assert_eq!(r.stats.mem_type_retired, e.mem_type);
        prop_assert_eq!(r.stats.flushes_branch, e.taken_branches);
        prop_assert_eq!(r.stats.l1d.accesses, e.mem_type);
        prop_assert_eq!(r.stats.l1i.accesses, r.stats.fetches);
    }

    #[test]
    fn cache_geometry_changes_timing_not_values(spec in small_spec(), seed in any::<u64>()) {
        let p = ConvProgram::random(Variant::RV64R, &spec, seed, 0).unwrap();
        let base = run(&p.image, &p.data(), &config()).unwrap();
        let tiny = SimConfig {
            l1d: CacheConfig { size_bytes: 256, associativity: 1, line_bytes: 16, hit_latency: 1 },
            l1i: CacheConfig { size_bytes: 128, associativity: 1, line_bytes: 16, hit_latency: 4 },
            ..config()
        };
        let other = run(&p.image, &p.data(), &tiny).unwrap();
        prop_assert_eq!(&base.state, &other.state);
        prop_assert!(base.memory == other.memory);
        prop_assert_eq!(base.stats.retired, other.stats.retired);
        prop_assert_ne!(base.stats.cycles, other.stats.cycles);
    }

    #[test]
    fn apr_is_clear_after_every_rfsmac(spec in small_spec(), seed in any::<u64>()) {
        let p = ConvProgram::random(Variant::RV64R, &spec, seed, 0).unwrap();
        let mut sim = Pipeline::new(&p.image, &p.data(), &config()).unwrap();
        let mut rfsmacs = 0;
        while !sim.state().halted {
            let ev = sim.step().unwrap();
            if let Some(r) = ev.retired {
                if r.mnemonic == Mnemonic::RfsmacS {
                    prop_assert_eq!(r.apr, 0);
                    rfsmacs += 1;
                }
            }
        }
        let stats = sim.stats();
        prop_assert_eq!(rfsmacs as usize, spec.output_len());
        prop_assert_eq!(stats.l1d.accesses, stats.mem_type_retired);
    }
}

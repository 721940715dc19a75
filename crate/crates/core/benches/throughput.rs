//! Data-parallel core against a one-thread pool. Build with
//! `--no-default-features` to measure the plain sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vcflow::dsp::{MelAnalyzer, MelConfig};
use vcflow::pipeline::{synth_corpus, train_step, Model, Split, SyntheticCorpus};

const SMALL: &str = r#"
[model]
memory_dim = 32
context_dim = 32
context_ff = 64
unet_hidden = 32
time_dim = 32

[train]
batch_size = 8
"#;

enum Pool {
    Ambient,
    #[cfg(feature = "parallel")]
    Single(rayon::ThreadPool),
}

impl Pool {
    fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match self {
            Pool::Ambient => f(),
            #[cfg(feature = "parallel")]
            Pool::Single(p) => p.install(f),
        }
    }
}

fn pools() -> Vec<(String, Pool)> {
    #[cfg(feature = "parallel")]
    {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        vec![
            (format!("rayon-{}", rayon::current_num_threads()), Pool::Ambient),
            ("rayon-1".into(), Pool::Single(one)),
        ]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential".into(), Pool::Ambient)]
    }
}

fn mel_batch(c: &mut Criterion) {
    let corpus = synth_corpus(2, 4, 1).unwrap();
    let analyzer = MelAnalyzer::new(&MelConfig::default()).unwrap();
    let mut group = c.benchmark_group("mel_analysis_8_utts");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| {
                pool.run(|| vcflow::par::map_slice(&corpus.utterances, |u| analyzer.analyze(&u.waveform).unwrap()))
            })
        });
    }
    group.finish();
}

fn setup() -> (Model, SyntheticCorpus, Split) {
    let corpus = synth_corpus(2, 4, 1).unwrap();
    let mut model = Model::new(SMALL).unwrap();
    let split = Split::new(&corpus, 1).unwrap();
    model.prepare(&corpus, &split.train).unwrap();
    (model, corpus, split)
}

fn train_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_step_batch_8");
    group.sample_size(10);
    for (name, pool) in pools() {
        let (mut model, corpus, split) = setup();
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.run(|| train_step(&mut model, &corpus, &split).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, mel_batch, train_steps);
criterion_main!(benches);

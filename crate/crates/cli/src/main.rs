use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vcflow::dsp::{load_wav, save_wav};
use vcflow::pipeline::{
    convert, evaluate, label_path, load_checkpoint, parse_labels, synth_corpus, train, ConvertOptions, Model,
    RunConfig, Split, SyntheticCorpus, LOSS_LOG_HEADER,
};
use vcflow::Error;

#[derive(Parser)]
#[command(name = "vcflow", version, about = "Flow-matching voice conversion on a synthetic corpus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic multi-speaker corpus with exact labels.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        speakers: usize,
        #[arg(long)]
        utts: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Train a model and write a checkpoint plus `<CKPT>.loss.tsv`.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `train.steps` from the config.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Convert the voice of SOURCE to the speaker of REF.
    Convert {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Euler steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Classifier-free guidance strength.
        #[arg(long)]
        cfg: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate held-out conversions and write a tab-separated report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

const BAD_ARGS: u8 = 2;
const BAD_INPUT: u8 = 3;
const BAD_CHECKPOINT: u8 = 4;

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => BAD_ARGS,
            Error::Checkpoint(_) => BAD_CHECKPOINT,
            Error::Wav(_) | Error::Config(_) | Error::Corpus(_) => BAD_INPUT,
            _ => 1,
        };
        fail(code, e.to_string())
    }
}

fn input<T>(what: &Path, r: vcflow::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        Error::Io(io) => fail(BAD_INPUT, format!("{}: {io}", what.display())),
        e => Failure::from(e),
    })
}

fn output<T>(what: &Path, r: std::io::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| fail(1, format!("{}: {e}", what.display())))
}

fn load_corpus(dir: &Path) -> Result<SyntheticCorpus, Failure> {
    input(dir, SyntheticCorpus::load(dir))
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    load_checkpoint(path).map_err(|e| match e {
        Error::Checkpoint(_) => fail(BAD_CHECKPOINT, e.to_string()),
        e => fail(BAD_CHECKPOINT, format!("checkpoint {}: {e}", path.display())),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::SynthCorpus {
            out,
            speakers,
            utts,
            seed,
        } => {
            if speakers < 2 || utts == 0 {
                return Err(fail(BAD_ARGS, "need --speakers >= 2 and --utts >= 1"));
            }
            let corpus = synth_corpus(speakers, utts, seed)?;
            corpus.save(&out).map_err(|e| match e {
                Error::Io(io) => fail(1, format!("{}: {io}", out.display())),
                e => e.into(),
            })?;
            println!("wrote {} utterances to {}", corpus.utterances.len(), out.display());
        }
        Command::Train {
            config,
            corpus,
            out,
            steps,
        } => {
            let text = fs::read_to_string(&config).map_err(|e| fail(BAD_INPUT, format!("{}: {e}", config.display())))?;
            let mut cfg = input(&config, RunConfig::from_toml(&text))?;
            let text = match steps {
                Some(n) => {
                    cfg.train.steps = n;
                    cfg.to_toml()
                }
                None => text,
            };
            let corpus = load_corpus(&corpus)?;
            let mut model = Model::new(&text).map_err(|e| fail(BAD_INPUT, e.to_string()))?;
            let split = input(&config, Split::new(&corpus, model.config.train.holdout_per_speaker))?;
            model.prepare(&corpus, &split.train)?;
            let log_path = PathBuf::from(format!("{}.loss.tsv", out.display()));
            let file = output(&log_path, fs::File::create(&log_path))?;
            let mut log = BufWriter::new(file);
            output(&log_path, writeln!(log, "{LOSS_LOG_HEADER}"))?;
            let n = model.config.train.steps;
            let report = train(&mut model, &corpus, &split, n, &mut log, Some(&out))?;
            if let (Some(first), Some(last)) = (report.stats.first(), report.stats.last()) {
                println!("trained {n} steps: L_total {:.4} -> {:.4}", first.total, last.total);
            }
            println!("checkpoint {}; loss log {}", out.display(), log_path.display());
        }
        Command::Convert {
            ckpt,
            source,
            reference,
            out,
            steps,
            cfg,
            seed,
        } => {
            let model = load_model(&ckpt)?;
            let src = input(&source, load_wav(&source))?;
            let refw = input(&reference, load_wav(&reference))?;
            let labels = match fs::read_to_string(label_path(&source)) {
                Ok(text) => Some(input(&source, parse_labels(&text))?),
                Err(_) => None,
            };
            let mut opts = ConvertOptions::from_model(&model);
            if let Some(k) = steps {
                opts.sampler.n_steps = k;
            }
            if let Some(g) = cfg {
                opts.sampler.cfg_gamma = g;
            }
            if let Some(s) = seed {
                opts.seed = s;
            }
            opts.sampler.validate().map_err(|e| fail(BAD_ARGS, e.to_string()))?;
            let c = convert(&model, &src, labels.as_deref(), &refw, &opts)?;
            save_wav(&out, &c.waveform).map_err(|e| fail(1, format!("{}: {e}", out.display())))?;
            println!(
                "wrote {} ({:.2}s, {} frames)",
                out.display(),
                c.waveform.duration_secs(),
                c.mel.n_frames()
            );
        }
        Command::Eval { ckpt, corpus, report } => {
            let model = load_model(&ckpt)?;
            let corpus = load_corpus(&corpus)?;
            let r = evaluate(&model, &corpus)?;
            output(&report, fs::write(&report, r.to_tsv()))?;
            println!(
                "secs_proxy {:.4} (source {:.4}), f0_ratio {:.4}, content_acc {:.4}, mel_l2 {:.4}",
                r.secs_proxy, r.secs_source, r.f0_ratio, r.content_acc, r.mel_l2
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { BAD_ARGS } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

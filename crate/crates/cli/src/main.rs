//! `tagger`: train, apply and evaluate the convolutional sequence tagger,
//! corrupt corpora and run the robustness sweep.
//!
//! Metrics go to stdout as TSV, logs to stderr. Exit codes: 0 success,
//! 1 usage error, 2 data or model error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use cnntag::corpus::conllu;
use cnntag::corpus::{Sentence, Task};
use cnntag::model::{predict_sentence, Mode, ModelConfig};
use cnntag::robustness::{
    corruption_plan, default_alphabet, robustness_experiment, CorruptOp, CorruptionSpec,
};
use cnntag::train::{evaluate, load_model, save_model, train, SavedModel, TrainConfig};

#[derive(Parser)]
#[command(
    name = "tagger",
    version,
    about = "Convolutional sequence tagger for CoNLL-U treebanks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Pos,
    Morph,
    Stag,
}

impl From<TaskArg> for Task {
    fn from(value: TaskArg) -> Task {
        match value {
            TaskArg::Pos => Task::Pos,
            TaskArg::Morph => Task::Morph,
            TaskArg::Stag => Task::Stag,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    W,
    C,
    Wc,
}

impl From<ModeArg> for Mode {
    fn from(value: ModeArg) -> Mode {
        match value {
            ModeArg::W => Mode::Word,
            ModeArg::C => Mode::Char,
            ModeArg::Wc => Mode::WordChar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Insert,
    Delete,
    Substitute,
}

impl From<OpArg> for CorruptOp {
    fn from(value: OpArg) -> CorruptOp {
        match value {
            OpArg::Insert => CorruptOp::Insert,
            OpArg::Delete => CorruptOp::Delete,
            OpArg::Substitute => CorruptOp::Substitute,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a tagger and write the model file
    Train {
        #[arg(long)]
        task: TaskArg,
        #[arg(long)]
        mode: ModeArg,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        max_epochs: usize,
        #[arg(long, default_value_t = 5)]
        patience: usize,
    },
    /// Tag a CoNLL-U file, writing predictions into the task's column
    Tag {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Token accuracy of a model against gold annotations
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Corrupt word forms with one edit operation
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        op: OpArg,
        #[arg(long)]
        prob: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Take the edit alphabet from this corpus instead of --input
        #[arg(long)]
        alphabet_from: Option<PathBuf>,
    },
    /// Corruption sweep: 3 operations x 4 probabilities on a dev set
    Robustness {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the TSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{}", e);
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{}", e);
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))
}

fn parse_corpus(path: &Path) -> Result<Vec<Sentence>, CliError> {
    let text = read_text(path)?;
    conllu::parse_conllu(&text).map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))
}

fn load(path: &Path) -> Result<SavedModel, CliError> {
    load_model(path).map_err(|e| CliError::Data(format!("{}: {}", path.display(), e)))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train {
            task,
            mode,
            train: train_path,
            dev,
            out,
            seed,
            max_epochs,
            patience,
        } => {
            if patience > max_epochs {
                return Err(CliError::Usage(format!(
                    "--patience {} must not exceed --max-epochs {}",
                    patience, max_epochs
                )));
            }
            let train_sents = parse_corpus(&train_path)?;
            let dev_sents = parse_corpus(&dev)?;
            let tcfg = TrainConfig {
                max_epochs,
                patience,
                seed,
                ..TrainConfig::default()
            };
            eprintln!(
                "training {} ({} mode) on {} sentences, dev {}",
                Task::from(task).name(),
                Mode::from(mode).name(),
                train_sents.len(),
                dev_sents.len()
            );
            let outcome = train(
                &train_sents,
                &dev_sents,
                task.into(),
                ModelConfig::standard(mode.into()),
                &tcfg,
            )
            .map_err(|e| CliError::Data(format!("{}: {}", train_path.display(), e)))?;
            for e in &outcome.report.epochs {
                eprintln!(
                    "epoch {}: loss {:.6} dev_acc {:.4} ({:.1}s)",
                    e.epoch, e.train_loss, e.dev_accuracy, e.seconds
                );
            }
            save_model(&outcome.model, &out)
                .map_err(|e| CliError::Data(format!("{}: {}", out.display(), e)))?;
            print!("{}", outcome.report.to_tsv());
            Ok(())
        }
        Command::Tag {
            model,
            input,
            output,
        } => {
            let saved = load(&model)?;
            let text = read_text(&input)?;
            let parsed = conllu::parse_conllu_with_lines(&text)
                .map_err(|e| CliError::Data(format!("{}: {}", input.display(), e)))?;
            let tags: Vec<Vec<String>> = parsed
                .iter()
                .map(|(s, _)| predict_sentence(s, &saved.params, &saved.config, &saved.vocab))
                .collect();
            let column = match saved.task {
                Task::Pos => conllu::TagColumn::Upos,
                Task::Morph => conllu::TagColumn::Feats,
                Task::Stag => conllu::TagColumn::StagMisc,
            };
            let rewritten = conllu::rewrite_tags(&text, &tags, column)
                .map_err(|e| CliError::Data(format!("{}: {}", input.display(), e)))?;
            write_text(&output, &rewritten)?;
            eprintln!("tagged {} sentences ({})", parsed.len(), saved.task.name());
            Ok(())
        }
        Command::Eval { model, gold } => {
            let saved = load(&model)?;
            let sentences = parse_corpus(&gold)?;
            if sentences.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: no sentences to evaluate",
                    gold.display()
                )));
            }
            let result = evaluate(
                &saved.params,
                &saved.config,
                &saved.vocab,
                &sentences,
                saved.task,
            )
            .map_err(|e| CliError::Data(format!("{}: {}", gold.display(), e)))?;
            eprintln!("{} correct of {}", result.correct, result.total);
            println!("accuracy\t{:.4}", result.accuracy);
            Ok(())
        }
        Command::Corrupt {
            input,
            output,
            op,
            prob,
            seed,
            alphabet_from,
        } => {
            if !(0.0..=1.0).contains(&prob) {
                return Err(CliError::Usage(format!(
                    "--prob {} must be in [0, 1]",
                    prob
                )));
            }
            let text = read_text(&input)?;
            let sentences = conllu::parse_conllu(&text)
                .map_err(|e| CliError::Data(format!("{}: {}", input.display(), e)))?;
            let alphabet_source = match &alphabet_from {
                Some(path) => parse_corpus(path)?,
                None => sentences.clone(),
            };
            let alphabet = default_alphabet(&alphabet_source);
            if alphabet.is_empty() {
                return Err(CliError::Data(
                    "alphabet source contains no characters".to_string(),
                ));
            }
            let spec = CorruptionSpec {
                op: op.into(),
                prob,
                seed,
                alphabet,
            };
            let plan = corruption_plan(&sentences, &spec);
            let rewritten = conllu::rewrite_forms(&text, &plan)
                .map_err(|e| CliError::Data(format!("{}: {}", input.display(), e)))?;
            write_text(&output, &rewritten)?;
            let edited: usize = plan.iter().flatten().filter(|e| e.is_some()).count();
            eprintln!("edited {} tokens", edited);
            Ok(())
        }
        Command::Robustness {
            model,
            dev,
            seed,
            out,
        } => {
            let saved = load(&model)?;
            if saved.task != Task::Pos {
                return Err(CliError::Data(format!(
                    "{}: the corruption sweep needs a pos model, this one predicts {}",
                    model.display(),
                    saved.task.name()
                )));
            }
            let sentences = parse_corpus(&dev)?;
            if sentences.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: no sentences to evaluate",
                    dev.display()
                )));
            }
            let alphabet: Vec<char> = saved
                .vocab
                .observed_chars()
                .iter()
                .copied()
                .filter(|c| !c.is_whitespace())
                .collect();
            if alphabet.is_empty() {
                return Err(CliError::Data(
                    "model vocabulary contains no usable characters".to_string(),
                ));
            }
            let table = robustness_experiment(&saved, &sentences, &alphabet, seed)
                .map_err(|e| CliError::Data(format!("{}: {}", dev.display(), e)))?;
            match out {
                Some(path) => write_text(&path, &table.to_tsv())?,
                None => print!("{}", table.to_tsv()),
            }
            Ok(())
        }
    }
}

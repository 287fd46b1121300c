use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use framefill_core::constraints::ConstraintMode;
use framefill_core::dataprep::{prepare, BlankPolicy, FflExample, PrepareConfig, Variant};
use framefill_core::decoder::{InfillOptions, InfillTask, PromptStyle};
use framefill_core::engine::{InfillRequest, SuggestRequest};
use framefill_core::eval::{eval_ppl_suite, fidelity, sample_targets};
use framefill_core::lexicon::{frame_token, Frame};
use framefill_core::scorer::{NgramScorer, DEFAULT_DISCOUNT};
use framefill_core::tokenizer::{merges_txt, train_bpe, BpeVocabulary, TokenId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::config::Config;
use crate::{artifacts, service, Cli, Command, Global};

pub fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let config = settings(&cli.global)?;
    let json = cli.global.json;
    match cli.command {
        Command::Prepare(a) => run_prepare(&config, a),
        Command::TrainBpe(a) => run_train_bpe(&config, a, json),
        Command::TrainLm(a) => run_train_lm(&config, a, json),
        Command::Infill(a) => run_infill(&config, a, json),
        Command::EvalFidelity(a) => run_eval_fidelity(&config, a, json),
        Command::EvalPpl(a) => run_eval_ppl(&config, a, json),
        Command::Suggest(a) => run_suggest(&config, a, json),
        Command::Serve(a) => run_serve(&config, a, false),
        Command::ServeScorer(a) => run_serve(&config, a, true),
    }
}

/// Config file and environment, then the global flags on top.
fn settings(g: &Global) -> anyhow::Result<Config> {
    let mut c = Config::resolve(g.config.as_deref())?;
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(d) = &g.data_dir {
        c.data.dir = d.clone();
    }
    if let Some(m) = &g.model {
        c.scorer.model = m.clone();
    }
    if let Some(u) = &g.scorer_url {
        c.scorer.url = Some(u.clone());
    }
    Ok(c)
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// `A`, `a:ordered`, `ilm` ...
fn parse_variant(s: &str) -> anyhow::Result<(Variant, bool)> {
    let (name, ordered) = match s.split_once(':') {
        Some((n, "ordered")) => (n, true),
        Some((_, other)) => bail!("unknown variant modifier {other:?} (expected \"ordered\")"),
        None => (s, false),
    };
    let v = Variant::parse(name)
        .with_context(|| format!("unknown variant {name:?} (expected ILM, S, M or A)"))?;
    Ok((v, ordered))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Blanks {
    One,
    Each,
    All,
}

impl From<Blanks> for BlankPolicy {
    fn from(b: Blanks) -> Self {
        match b {
            Blanks::One => BlankPolicy::One,
            Blanks::Each => BlankPolicy::Each,
            Blanks::All => BlankPolicy::All,
        }
    }
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Annotated stories (JSONL); defaults to the configured corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated variants, each optionally suffixed with `:ordered`.
    #[arg(long, default_value = "ILM,A")]
    pub variants: String,
    #[arg(long, value_enum, default_value = "one")]
    pub blanks: Blanks,
    /// Cut each story to a random window around its blank.
    #[arg(long)]
    pub slice_context: bool,
    /// Pad frame lists to this many slots.
    #[arg(long)]
    pub slots: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn prepare_examples(config: &Config, a: &PrepareArgs) -> anyhow::Result<Vec<FflExample>> {
    let mut config = config.clone();
    if let Some(c) = &a.corpus {
        config.data.corpus = std::path::absolute(c)?;
    }
    let lexicon = artifacts::lexicon(&config)?;
    let stories = artifacts::corpus(&config, &lexicon)?;
    let variants = a
        .variants
        .split(',')
        .map(|s| parse_variant(s.trim()))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(prepare(
        &stories,
        &PrepareConfig {
            variants,
            blanks: a.blanks.into(),
            slice_context: a.slice_context,
            slots: a.slots,
            seed: config.seed,
        },
    ))
}

fn run_prepare(config: &Config, a: PrepareArgs) -> anyhow::Result<()> {
    let examples = prepare_examples(config, &a)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    for ex in &examples {
        serde_json::to_writer(&mut out, ex)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    if a.out.is_some() {
        log::info!("wrote {} examples", examples.len());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainBpeArgs {
    /// Annotated stories (JSONL); defaults to the configured corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub merges: usize,
    #[arg(long, default_value_t = 2)]
    pub min_frequency: u64,
    /// Directory for vocab.json, merges.txt and specials.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn run_train_bpe(config: &Config, a: TrainBpeArgs, json: bool) -> anyhow::Result<()> {
    let mut config = config.clone();
    if let Some(c) = &a.corpus {
        config.data.corpus = std::path::absolute(c)?;
    }
    let lexicon = artifacts::lexicon(&config)?;
    let stories = artifacts::corpus(&config, &lexicon)?;
    let sentences = stories
        .iter()
        .flat_map(|s| s.sentences.iter().map(String::as_str));
    let (table, merges) = train_bpe(sentences, a.merges, a.min_frequency);
    let mut vocab = BpeVocabulary::new(table, merges.clone(), Default::default())?;
    let frame_tokens: Vec<String> = lexicon
        .frames()
        .iter()
        .map(|f| frame_token(&f.name))
        .collect();
    vocab.add_specials(frame_tokens.iter().map(String::as_str));
    std::fs::create_dir_all(&a.out_dir)?;
    std::fs::write(a.out_dir.join("vocab.json"), vocab.vocab_json())?;
    std::fs::write(a.out_dir.join("merges.txt"), merges_txt(&merges))?;
    std::fs::write(a.out_dir.join("specials.json"), vocab.specials_json())?;
    if json {
        print_json(&serde_json::json!({"merges": merges.len(), "vocab_size": vocab.len()}))
    } else {
        println!(
            "{} merges, {} tokens including specials",
            merges.len(),
            vocab.len()
        );
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct TrainLmArgs {
    /// Prepared examples (JSONL from `prepare`); when absent the corpus is
    /// prepared with every sentence blanked as ILM, A and ordered A.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
    pub discount: f64,
    /// Model file; defaults to the configured model path.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn run_train_lm(config: &Config, a: TrainLmArgs, json: bool) -> anyhow::Result<()> {
    let vocab = artifacts::vocab(config)?;
    let examples: Vec<FflExample> = match &a.input {
        Some(p) => {
            let file =
                std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            std::io::BufReader::new(file)
                .lines()
                .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
                .map(|l| Ok(serde_json::from_str(&l?)?))
                .collect::<anyhow::Result<_>>()?
        }
        None => prepare_examples(
            config,
            &PrepareArgs {
                corpus: None,
                variants: "ILM,A,A:ordered".into(),
                blanks: Blanks::Each,
                slice_context: false,
                slots: None,
                out: None,
            },
        )?,
    };
    let seqs: Vec<Vec<TokenId>> = examples.iter().map(|e| vocab.encode(&e.surface)).collect();
    let lm = NgramScorer::train(&seqs, a.order, vocab.len(), a.discount)?;
    let out = a.out.clone().unwrap_or_else(|| config.scorer.model.clone());
    lm.save(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    let tokens: usize = seqs.iter().map(Vec::len).sum();
    if json {
        print_json(
            &serde_json::json!({"examples": seqs.len(), "tokens": tokens, "order": a.order, "model": out}),
        )
    } else {
        println!(
            "trained order-{} model on {} examples ({tokens} tokens) -> {}",
            a.order,
            seqs.len(),
            out.display()
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Prompt {
    Ilm,
    Ffl,
    Ffl5,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Frames must trigger in the listed order.
    #[arg(long, conflicts_with = "unordered")]
    pub ordered: bool,
    /// Frames may trigger in any order (the default).
    #[arg(long)]
    pub unordered: bool,
    /// Beam size [default: 20]
    #[arg(long)]
    pub beam: Option<usize>,
    /// Token budget per blank [default: 40]
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    /// Candidates to return per blank [default: 5]
    #[arg(long)]
    pub num_candidates: Option<usize>,
    /// Prompt format: plain infilling, frames, or frames padded to 5 slots [default: ffl]
    #[arg(long, value_enum)]
    pub prompt: Option<Prompt>,
}

impl DecodeArgs {
    fn options(&self, config: &Config) -> InfillOptions {
        InfillOptions {
            mode: if self.ordered {
                ConstraintMode::Ordered
            } else {
                ConstraintMode::Unordered
            },
            beam_size: self.beam.unwrap_or(config.decode.beam),
            max_new_tokens: self.max_new_tokens.unwrap_or(config.decode.max_new_tokens),
            num_candidates: self.num_candidates.unwrap_or(config.decode.num_candidates),
            prompt: match self.prompt {
                Some(Prompt::Ilm) => PromptStyle::Ilm,
                Some(Prompt::Ffl5) => PromptStyle::Ffl5,
                _ => PromptStyle::Ffl,
            },
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct InfillArgs {
    /// Story text with `[blank]` marking the sentences to fill.
    #[arg(conflicts_with = "file")]
    pub story: Option<String>,
    /// Read the story from a file instead.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Frames for one blank, e.g. "[Commerce_buy] [Food]"; repeat per blank.
    #[arg(long)]
    pub frames: Vec<String>,
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// Diversify over about this many lexical-unit subsets.
    #[arg(long)]
    pub diversify: Option<usize>,
    /// Frames only prompt the model; no lexical constraints.
    #[arg(long)]
    pub unconstrained: bool,
}

fn split_frames(s: &str) -> Vec<String> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

fn read_story(story: &Option<String>, file: &Option<PathBuf>) -> anyhow::Result<String> {
    match (story, file) {
        (Some(s), _) => Ok(s.clone()),
        (None, Some(p)) => {
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
        }
        (None, None) => bail!("give a story inline or with --file"),
    }
}

fn run_infill(config: &Config, a: InfillArgs, json: bool) -> anyhow::Result<()> {
    let mut task = InfillTask::from_text(&read_story(&a.story, &a.file)?);
    task.frames = a.frames.iter().map(|f| split_frames(f)).collect();
    // validate before loading the model
    let lexicon = artifacts::lexicon(config)?;
    framefill_core::decoder::resolve_frames(&lexicon, &task.frames.concat())
        .map_err(framefill_core::engine::EngineError::from)?;
    let mut options = a.decode.options(config);
    options.diversify = a.diversify;
    options.constrained = !a.unconstrained;
    let engine = artifacts::engine(config)?;
    let response = engine.infill(&InfillRequest { task, options })?;
    if json {
        return print_json(&response);
    }
    for blank in &response.blanks {
        println!("blank {} {}", blank.position, blank.frames.join(" "));
        if blank.failed {
            println!("  no candidate met every constraint; best partial hypotheses:");
        }
        for (i, c) in blank.candidates.iter().enumerate() {
            let sat = if c.satisfied_frames.is_empty() {
                String::new()
            } else {
                format!("  {}", c.satisfied_frames.join(" "))
            };
            println!("  {:>2}. {}  ({:.3}){sat}", i + 1, c.text, c.logprob);
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalFidelityArgs {
    /// Score existing outputs: JSONL with `text` and `frames` per line.
    #[arg(long)]
    pub outputs: Option<PathBuf>,
    /// Otherwise generate for this many corpus stories.
    #[arg(long, default_value_t = 50)]
    pub limit: usize,
    /// Condition on a random subset of this many of the sentence's frames.
    #[arg(long)]
    pub targets: Option<usize>,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Deserialize)]
struct Output {
    text: String,
    frames: Vec<String>,
}

fn run_eval_fidelity(config: &Config, a: EvalFidelityArgs, json: bool) -> anyhow::Result<()> {
    let lexicon = artifacts::lexicon(config)?;
    let vocab = artifacts::vocab(config)?;
    let outputs: Vec<(String, Vec<String>)> = match &a.outputs {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str::<Output>(l).map(|o| (o.text, o.frames)))
                .collect::<Result<_, _>>()?
        }
        None => generate_for_fidelity(config, &a)?,
    };
    let resolved: Vec<(String, Vec<&Frame>)> = outputs
        .iter()
        .map(|(t, f)| {
            Ok((
                t.clone(),
                framefill_core::decoder::resolve_frames(&lexicon, f)?,
            ))
        })
        .collect::<Result<_, framefill_core::decoder::InfillError>>()
        .map_err(framefill_core::engine::EngineError::from)?;
    let report = fidelity(&resolved, &vocab);
    if json {
        print_json(&report)
    } else {
        print!("{}", report.table());
        Ok(())
    }
}

fn generate_for_fidelity(
    config: &Config,
    a: &EvalFidelityArgs,
) -> anyhow::Result<Vec<(String, Vec<String>)>> {
    let engine = artifacts::engine(config)?;
    let stories = artifacts::corpus(config, engine.lexicon())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let options = a.decode.options(config);
    let mut out = Vec::new();
    for story in stories
        .iter()
        .filter(|s| s.frames.iter().any(|f| !f.is_empty()))
        .take(a.limit)
    {
        let framed: Vec<usize> = (0..story.sentences.len())
            .filter(|&i| !story.frames[i].is_empty())
            .collect();
        let blank = framed[rng.random_range(0..framed.len())];
        let targets = sample_targets(&story.frames[blank], a.targets, &mut rng);
        let task = InfillTask {
            sentences: story
                .sentences
                .iter()
                .enumerate()
                .map(|(i, s)| (i != blank).then(|| s.clone()))
                .collect(),
            frames: vec![targets.clone()],
        };
        let response = engine.infill(&InfillRequest {
            task,
            options: options.clone(),
        })?;
        let text = response.blanks[0]
            .candidates
            .first()
            .map(|c| c.text.clone())
            .unwrap_or_default();
        out.push((text, targets));
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct EvalPplArgs {
    /// Annotated stories (JSONL); defaults to the configured corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "A")]
    pub variant: String,
    #[arg(long)]
    pub ordered: bool,
    /// Use only the first N stories.
    #[arg(long)]
    pub limit: Option<usize>,
}

fn run_eval_ppl(config: &Config, a: EvalPplArgs, json: bool) -> anyhow::Result<()> {
    let mut config = config.clone();
    if let Some(c) = &a.corpus {
        config.data.corpus = std::path::absolute(c)?;
    }
    let (variant, _) = parse_variant(&a.variant)?;
    let lexicon = artifacts::lexicon(&config)?;
    let vocab = artifacts::vocab(&config)?;
    let scorer = artifacts::scorer(&config, &vocab)?;
    let mut stories = artifacts::corpus(&config, &lexicon)?;
    if let Some(n) = a.limit {
        stories.truncate(n);
    }
    let table = eval_ppl_suite(
        scorer.as_ref(),
        &vocab,
        &stories,
        variant,
        a.ordered,
        config.seed,
    )?;
    if json {
        print_json(&table)
    } else {
        print!("{}", table.table());
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct SuggestArgs {
    /// Story text with one `[blank]`.
    pub story: String,
    /// Sentence index to suggest for; defaults to the first blank.
    #[arg(long)]
    pub position: Option<usize>,
    #[arg(long, short, default_value_t = 5)]
    pub k: usize,
}

fn run_suggest(config: &Config, a: SuggestArgs, json: bool) -> anyhow::Result<()> {
    let task = InfillTask::from_text(&a.story);
    let position = match a.position {
        Some(p) => p,
        None => *task
            .blank_positions()
            .first()
            .context("the story has no [blank]")?,
    };
    let engine = artifacts::engine(config)?;
    let response = engine.suggest(&SuggestRequest {
        sentences: task.sentences,
        position,
        k: a.k,
        frames: None,
    })?;
    if json {
        return print_json(&response);
    }
    for s in &response.frames {
        println!("{:<28} {:.4}", s.frame, s.probability);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address; defaults to the configured one.
    #[arg(long)]
    pub addr: Option<String>,
    /// Session directory; defaults to the configured one.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
}

fn run_serve(config: &Config, a: ServeArgs, scorer_only: bool) -> anyhow::Result<()> {
    let addr = a.addr.clone().unwrap_or_else(|| config.serve.addr.clone());
    let app = if scorer_only {
        let vocab = artifacts::vocab(config)?;
        service::scorer_router(artifacts::scorer(config, &vocab)?)
    } else {
        let sessions = a
            .sessions
            .clone()
            .unwrap_or_else(|| config.serve.sessions.clone());
        service::router(Arc::new(artifacts::engine(config)?), sessions)
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

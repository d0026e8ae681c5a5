use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use shiftbuf::data::{
    g2p, read_features, write_features, write_matrix_file, CorpusManifest, Dictionary, PhonemeInventory,
    SyntheticCorpus,
};
use shiftbuf::eval::{benchmark_inference, mcd, mcd_dtw, memory_significance, CentroidClassifier};
use shiftbuf::grad::{CheckPlan, ToyProblem};
use shiftbuf::model::io::{load_weights, save_weights};
use shiftbuf::model::TENSOR_NAMES;
use shiftbuf::train::{fit_speaker, load_checkpoint, prime_buffer, save_checkpoint, Checkpoint, Trainer};
use shiftbuf::{synthesize, Error, HyperParams, ModelParams, SpeakerEmbedding, SynthesisConfig};

use crate::config::RunConfig;
use crate::{Cli, Command, FitArgs, GenCorpusArgs, McdArgs, PrimeArgs, SentenceArgs, SynthArgs, TrainArgs, VoiceArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::InvalidInput(msg.into()))
}

/// Flags layered over the config file.
struct Ctx {
    cfg: RunConfig,
    seed: u64,
    jobs: usize,
    weights: Option<PathBuf>,
    out: Option<PathBuf>,
    inventory: Option<PathBuf>,
    dict: Option<PathBuf>,
    manifest: Option<PathBuf>,
}

impl Ctx {
    fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| usage("this subcommand needs --out"))
    }

    fn weights(&self) -> Result<ModelParams> {
        let p = self.weights.as_deref().ok_or_else(|| usage("this subcommand needs --weights"))?;
        Ok(load_weights(p)?)
    }

    fn manifest(&self) -> Result<CorpusManifest> {
        let p = self.manifest.as_deref().ok_or_else(|| usage("this subcommand needs --manifest"))?;
        Ok(CorpusManifest::load(p)?)
    }

    fn inventory(&self) -> Result<PhonemeInventory> {
        Ok(match &self.inventory {
            Some(p) => PhonemeInventory::load(p)?,
            None => PhonemeInventory::default(),
        })
    }

    fn log_seed(&self) {
        eprintln!("seed {}", self.seed);
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let g = cli.global;
    let cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: g.seed.or(cfg.seed).unwrap_or(0),
        jobs: g.jobs.or(cfg.jobs).unwrap_or(1),
        weights: g.weights.or_else(|| cfg.weights.clone()),
        out: g.out,
        inventory: g.inventory.or_else(|| cfg.inventory.clone()),
        dict: g.dict.or_else(|| cfg.dict.clone()),
        manifest: g.manifest.or_else(|| cfg.manifest.clone()),
        cfg,
    };
    match cli.command {
        Command::GenCorpus(a) => gen_corpus(&ctx, &a),
        Command::Train(a) => train(&ctx, &a),
        Command::Synth(a) => synth(&ctx, &a),
        Command::FitSpeaker(a) => fit(&ctx, &a),
        Command::PrimeSynth(a) => prime_synth(&ctx, &a),
        Command::EvalMcd(a) => eval_mcd(&ctx, &a),
        Command::EvalId(a) => eval_id(&ctx, &a.inputs, a.expect),
        Command::Gradcheck(a) => gradcheck(&ctx, a.eps, a.tol, a.per_tensor),
        Command::Significance => significance(&ctx),
        Command::Bench(a) => bench(&ctx, a.phonemes, a.frames),
        Command::Inspect => inspect(&ctx),
    }
}

fn gen_corpus(ctx: &Ctx, a: &GenCorpusArgs) -> Result<ExitCode> {
    let mut spec = ctx.cfg.corpus(ctx.seed)?;
    spec.n_speakers = a.speakers.unwrap_or(spec.n_speakers);
    spec.n_sentences = a.sentences.unwrap_or(spec.n_sentences);
    spec.d_o = a.d_o.unwrap_or(spec.d_o);
    spec.n_phonemes = a.n_phonemes.unwrap_or(spec.n_phonemes);
    spec.noise_std = a.noise.unwrap_or(spec.noise_std);
    spec.validate()?;
    ctx.log_seed();
    let gen = SyntheticCorpus::generate(&spec)?;
    let dir = ctx.out()?;
    gen.write(dir)?;
    println!("{} utterances, {} speakers written to {}", gen.corpus.len(), spec.n_speakers, dir.display());
    Ok(ExitCode::SUCCESS)
}

fn train(ctx: &Ctx, a: &TrainArgs) -> Result<ExitCode> {
    if a.resume.is_some() && ctx.weights.is_some() {
        return Err(usage("--resume and --weights both give starting parameters; pass one"));
    }
    let out = ctx.out()?.to_path_buf();
    let corpus = ctx.manifest()?.load_corpus()?;
    let mut cfg = ctx.cfg.train_config(ctx.seed, ctx.jobs)?;
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    cfg.max_steps = a.max_steps.or(cfg.max_steps);
    if a.optimizer.is_some() {
        cfg.optimizer = ctx.cfg.optimizer(a.optimizer.as_deref())?;
    }
    cfg.validate()?;
    let mut tf = ctx.cfg.teacher()?;
    tf.noise_std = a.noise.unwrap_or(tf.noise_std);

    let mut trainer = if let Some(path) = &a.resume {
        let ck = load_checkpoint(path)?;
        eprintln!("resuming after epoch {}", ck.epochs_done);
        Trainer::resume(ck.params, ck.state, ck.epochs_done, cfg.clone(), tf)?
    } else {
        let params = match &ctx.weights {
            Some(_) => ctx.weights()?,
            None => {
                let base = HyperParams {
                    d_o: corpus.feature_dim().unwrap_or(HyperParams::default().d_o),
                    n_speakers: corpus.n_speakers,
                    ..HyperParams::default()
                };
                let mut p = ModelParams::init(ctx.cfg.hyper(base)?, ctx.seed)?;
                if let Some(pace) = ctx.cfg.model.attention_pace {
                    p.set_attention_pace(pace)?;
                }
                p
            }
        };
        Trainer::new(params, cfg.clone(), tf)?
    };
    ctx.log_seed();

    let every = cfg.checkpoint_every.unwrap_or(usize::MAX);
    trainer.run(&corpus, |t| {
        let e = t.log().epochs.last().expect("an epoch just finished");
        eprintln!("epoch {} steps {} loss {:.6e} ({:.1}s)", e.epoch, e.steps, e.mean_loss, e.wall_secs);
        if let Some(path) = &a.checkpoint {
            if t.epochs_done() % every == 0 {
                write_checkpoint_of(path, t)?;
            }
        }
        Ok(())
    })?;
    if let Some(path) = &a.checkpoint {
        write_checkpoint_of(path, &trainer)?;
    }
    if let Some(path) = &a.log {
        std::fs::write(path, format!("# seed {}\n{}", ctx.seed, trainer.log().to_tsv()))?;
    }
    let (params, log, _) = trainer.into_parts();
    save_weights(&out, &params)?;
    match log.last_loss() {
        Some(l) => println!("final mean loss {l:.6e}"),
        None => println!("no epochs left to run"),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_checkpoint_of(path: &Path, t: &Trainer) -> shiftbuf::Result<()> {
    let ck = Checkpoint { params: t.params().clone(), state: t.state().clone(), epochs_done: t.epochs_done() };
    save_checkpoint(path, &ck)
}

fn parse_ids(s: &str) -> Result<Vec<usize>> {
    let ids = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| usage(format!("bad phoneme id {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if ids.is_empty() {
        return Err(usage("phoneme list is empty"));
    }
    Ok(ids)
}

fn sentence(ctx: &Ctx, phonemes: Option<&str>, text: Option<&str>) -> Result<Vec<usize>> {
    match (phonemes, text) {
        (Some(p), _) => parse_ids(p),
        (None, Some(t)) => {
            let path = ctx.dict.as_deref().ok_or_else(|| usage("--text needs --dict"))?;
            let dict = Dictionary::load(path)?;
            Ok(g2p(t, &dict, &ctx.inventory()?)?)
        }
        (None, None) => Err(usage("give the sentence as --phonemes or --text")),
    }
}

fn read_speaker_file(path: &Path, d_s: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let z = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|_| CliError::Core(Error::Format(format!("{}: bad number {t:?}", path.display()))))
        })
        .collect::<Result<Vec<_>>>()?;
    if z.len() != d_s {
        return Err(CliError::Core(Error::Format(format!(
            "{}: {} values, model needs {d_s}",
            path.display(),
            z.len()
        ))));
    }
    Ok(z)
}

fn voice(ctx: &Ctx, params: &ModelParams, v: &VoiceArgs) -> Result<(SpeakerEmbedding, SynthesisConfig)> {
    let z = match &v.speaker_file {
        Some(p) => SpeakerEmbedding::new(read_speaker_file(p, params.hyper.d_s())?),
        None => SpeakerEmbedding::from_table(params, v.speaker.unwrap_or(0))?,
    };
    let mut cfg = ctx.cfg.synthesis()?;
    cfg.max_frames = v.max_frames.or(cfg.max_frames);
    Ok((z, cfg))
}

fn synth_and_write(
    ctx: &Ctx,
    params: &ModelParams,
    s: &SentenceArgs,
    v: &VoiceArgs,
    prime: Option<(&str, bool)>,
) -> Result<ExitCode> {
    let out = ctx.out()?;
    let phonemes = sentence(ctx, s.phonemes.as_deref(), s.text.as_deref())?;
    let (z, cfg) = voice(ctx, params, v)?;
    let primed = match prime {
        Some((p, is_text)) => {
            let ids = if is_text { sentence(ctx, None, Some(p))? } else { parse_ids(p)? };
            Some(prime_buffer(params, &z, &ids, &cfg)?)
        }
        None => None,
    };
    let r = synthesize(&phonemes, &z, params, &cfg, primed.as_ref())?;
    write_features(out, &r.features)?;
    if let Some(path) = &v.trace {
        write_matrix_file(path, &r.trace.alpha_matrix(), cfg.frame_shift_ms)?;
    }
    println!("{} phonemes -> {} frames ({:?})", phonemes.len(), r.features.len(), r.stop);
    Ok(ExitCode::SUCCESS)
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<ExitCode> {
    ctx.out()?;
    let params = ctx.weights()?;
    synth_and_write(ctx, &params, &a.sentence, &a.voice, None)
}

fn prime_synth(ctx: &Ctx, a: &PrimeArgs) -> Result<ExitCode> {
    ctx.out()?;
    let params = ctx.weights()?;
    let prime = match (&a.prime_phonemes, &a.prime_text) {
        (Some(p), _) => (p.as_str(), false),
        (None, Some(t)) => (t.as_str(), true),
        (None, None) => return Err(usage("give the prime as --prime-phonemes or --prime-text")),
    };
    synth_and_write(ctx, &params, &a.sentence, &a.voice, Some(prime))
}

fn fit(ctx: &Ctx, a: &FitArgs) -> Result<ExitCode> {
    let out = ctx.out()?;
    let params = ctx.weights()?;
    let corpus = ctx.manifest()?.load_corpus()?;
    let samples: Vec<_> = corpus
        .utterances
        .into_iter()
        .filter(|u| a.speaker.is_none() || a.speaker == Some(u.speaker))
        .map(|u| (u.phonemes, u.features))
        .collect();
    if samples.is_empty() {
        return Err(invalid("no manifest rows for the requested speaker"));
    }
    let mut cfg = ctx.cfg.fit(ctx.seed);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.iterations = a.iterations.unwrap_or(cfg.iterations);
    let mut tf = ctx.cfg.teacher()?;
    tf.noise_std = a.noise.unwrap_or(tf.noise_std);
    ctx.log_seed();
    let r = fit_speaker(&params, &samples, &cfg, &tf)?;
    let line: Vec<String> = r.z.z.iter().map(|v| v.to_string()).collect();
    std::fs::write(out, line.join(" ") + "\n")?;
    println!(
        "fitted on {} utterances, loss {:.6e} -> {:.6e}",
        samples.len(),
        r.history.first().copied().unwrap_or(r.loss),
        r.loss
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_range(s: Option<&str>, dim: usize) -> Result<Range<usize>> {
    let Some(s) = s else { return Ok(0..dim) };
    let (a, b) = s.split_once("..").ok_or_else(|| usage(format!("range must look like start..end, got {s:?}")))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| usage(format!("bad range bound {t:?}")));
    let r = parse(a)?..parse(b)?;
    if r.start >= r.end || r.end > dim {
        return Err(invalid(format!("range {s} does not fit {dim} coefficients")));
    }
    Ok(r)
}

fn eval_mcd(ctx: &Ctx, a: &McdArgs) -> Result<ExitCode> {
    let x = read_features(&a.reference)?;
    let y = read_features(&a.candidate)?;
    if x.dim() != y.dim() {
        return Err(invalid(format!("feature widths differ: {} vs {}", x.dim(), y.dim())));
    }
    let range = parse_range(a.range.as_deref(), x.dim())?;
    if a.no_dtw {
        if x.len() != y.len() {
            return Err(invalid(format!("--no-dtw needs equal lengths, got {} and {}", x.len(), y.len())));
        }
        let total: f64 =
            (0..x.len()).map(|t| mcd(x.frame(t), y.frame(t), range.clone())).sum::<shiftbuf::Result<f64>>()?;
        println!("mcd\t{:.6}", total / x.len() as f64);
        return Ok(ExitCode::SUCCESS);
    }
    let (cost, dtw) = mcd_dtw(&x, &y, range)?;
    println!("mcd_dtw\t{cost:.6}\npath_len\t{}", dtw.len());
    if let Some(out) = &ctx.out {
        let mut s = String::from("ref\tcand\n");
        for (i, j) in &dtw.path {
            s.push_str(&format!("{i}\t{j}\n"));
        }
        std::fs::write(out, s)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn eval_id(ctx: &Ctx, inputs: &[PathBuf], expect: Option<usize>) -> Result<ExitCode> {
    let corpus = ctx.manifest()?.load_corpus()?;
    let clf = CentroidClassifier::fit_corpus(&corpus)?;
    let mut hits = 0;
    for p in inputs {
        let s = clf.classify(&read_features(p)?)?;
        hits += usize::from(Some(s) == expect);
        println!("{}\t{s}", p.display());
    }
    if let Some(e) = expect {
        println!("accuracy\t{:.4}\t({hits}/{} to speaker {e})", hits as f64 / inputs.len() as f64, inputs.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(ctx: &Ctx, eps: f64, tol: f64, per_tensor: Option<usize>) -> Result<ExitCode> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(usage("--eps must be positive"));
    }
    let hyper = ctx.cfg.hyper(HyperParams::toy())?;
    ctx.log_seed();
    let toy = ToyProblem::new(hyper, ctx.seed)?;
    let plan = match per_tensor {
        Some(n) => CheckPlan::Subsample { per_tensor: n, seed: ctx.seed },
        None => CheckPlan::All,
    };
    let report = toy.check(eps, &plan)?;
    print!("{}", report.to_tsv());
    let worst = report.max_rel_err();
    if worst < tol {
        println!("PASS max relative error {worst:.3e} < {tol:e}");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL max relative error {worst:.3e} >= {tol:e}");
        Ok(ExitCode::from(3))
    }
}

fn significance(ctx: &Ctx) -> Result<ExitCode> {
    let params = ctx.weights()?;
    let tsv = memory_significance(&params).to_tsv();
    match &ctx.out {
        Some(p) => std::fs::write(p, tsv)?,
        None => print!("{tsv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(ctx: &Ctx, phonemes: usize, frames: usize) -> Result<ExitCode> {
    if phonemes == 0 || frames == 0 {
        return Err(usage("--phonemes and --frames must be at least 1"));
    }
    let hyper = ctx.cfg.hyper(HyperParams::default())?;
    let shift = ctx.cfg.synthesis()?.frame_shift_ms;
    ctx.log_seed();
    let b = benchmark_inference(hyper, ctx.seed, phonemes, frames, shift)?;
    println!("parameters\t{}", b.param_count);
    println!("phonemes\t{}\nframes\t{}\nseconds\t{:.4}", b.phonemes, b.frames, b.seconds);
    println!("frames_per_sec\t{:.1}\nreal_time_factor\t{:.3}", b.frames_per_sec, b.real_time_factor);
    Ok(ExitCode::SUCCESS)
}

fn inspect(ctx: &Ctx) -> Result<ExitCode> {
    let params = match &ctx.weights {
        Some(_) => ctx.weights()?,
        None => ModelParams::zeros(ctx.cfg.hyper(HyperParams::default())?)?,
    };
    let h = params.hyper;
    println!(
        "d_p {} d_o {} k {} c {} n_phonemes {} n_speakers {} update {:?}",
        h.d_p, h.d_o, h.k, h.c, h.n_phonemes, h.n_speakers, h.update
    );
    for (name, t) in TENSOR_NAMES.iter().zip(params.tensors()) {
        println!("{name}\t{}x{}", t.rows(), t.cols());
    }
    println!("parameters\t{}", params.param_count());
    Ok(ExitCode::SUCCESS)
}

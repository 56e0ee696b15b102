use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use shapecx::evaluation::{compare_to_reference, rank as rank_scores, subset_experiment, ReferenceRanking};
use shapecx::imaging::{desk_corpus, list_images, load_image, preprocess as preprocess_image, save_pgm, DEFAULT_THRESHOLD};
use shapecx::measures::{combine, combine_equalized, parse_components, Component, Measure, ScoreVector, DEFLATE_LEVEL};
use shapecx::numerics::AdamConfig;
use shapecx::reporting::{read_scores_csv, render_montage, render_scatter, write_scores_csv, RankScatter, ScoreRow, Series};
use shapecx::vae::{load_model_for_slot, save_model, train_with, vae_complexity_many, TrainConfig};
use shapecx::{Error, Mask};

use crate::CliError;

type CmdResult = Result<(), CliError>;

fn log_config(cmd: &str, pairs: &[(&str, String)]) {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("shapecx {cmd}: {}", body.join(" "));
}

/// Writes `<path>.meta` with the resolved settings of the run that made `path`.
fn write_meta(path: &Path, cmd: &str, pairs: &[(&str, String)]) -> CmdResult {
    let mut text = format!("command={cmd}\nversion={}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in pairs {
        writeln!(text, "{k}={v}").unwrap();
    }
    let mut meta = path.as_os_str().to_owned();
    meta.push(".meta");
    write_file(Path::new(&meta), text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(())
}

fn ensure_parent(path: &Path) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_owned(),
            source: e,
        })?;
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads every decodable image of `dir` as a mask.
///
/// 64×64 images are binarized as they are; anything else goes through the
/// full crop-and-resize preprocessing. Undecodable files are skipped with a
/// message.
fn load_masks(dir: &Path, threshold: u8) -> Result<Vec<Mask>, CliError> {
    let (images, others) = list_images(dir)?;
    for p in &others {
        eprintln!("skip {}: not a .pgm or .png file", p.display());
    }
    let mut masks = Vec::with_capacity(images.len());
    let mut ids = HashSet::new();
    for path in &images {
        let id = stem(path);
        let loaded = load_image(path).and_then(|img| {
            if img.width == shapecx::MASK_SIDE && img.height == shapecx::MASK_SIDE {
                Mask::from_raw(id.clone(), &img, threshold)
            } else {
                preprocess_image(&img, threshold).map(|m| m.with_id(id.clone()))
            }
        });
        match loaded {
            Ok(m) => {
                if !ids.insert(id.clone()) {
                    return Err(CliError::usage(format!("two images share the id `{id}` in {}", dir.display())));
                }
                masks.push(m);
            }
            Err(e) => eprintln!("skip {}: {e}", path.display()),
        }
    }
    if masks.is_empty() {
        return Err(CliError::usage(format!("no images found in {}", dir.display())));
    }
    Ok(masks)
}

/// Order-preserving parallel map over at most `jobs` scoped threads.
fn par_map<T: Sync, U: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    if jobs <= 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                s.spawn(move || c.iter().map(f).collect::<Vec<U>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct PreprocessArgs {
    /// Directory of PGM/PNG images.
    input: PathBuf,
    /// Output directory for 64×64 P5 PGM masks.
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
}

pub fn preprocess(a: PreprocessArgs) -> CmdResult {
    let cfg = [
        ("input", a.input.display().to_string()),
        ("output", a.output.display().to_string()),
        ("threshold", a.threshold.to_string()),
        ("seed", "none".to_owned()),
    ];
    log_config("preprocess", &cfg);
    let (images, others) = list_images(&a.input)?;
    for p in &others {
        eprintln!("skip {}: not a .pgm or .png file", p.display());
    }
    if images.is_empty() {
        return Err(CliError::usage(format!("no images found in {}", a.input.display())));
    }
    fs::create_dir_all(&a.output).map_err(|e| Error::Io {
        path: a.output.clone(),
        source: e,
    })?;
    let mut written = 0;
    for path in &images {
        match load_image(path).and_then(|img| preprocess_image(&img, a.threshold)) {
            Ok(m) => {
                save_pgm(&m.to_raw(), a.output.join(format!("{}.pgm", stem(path))))?;
                written += 1;
            }
            Err(e) => eprintln!("skip {}: {e}", path.display()),
        }
    }
    eprintln!("wrote {written} of {} masks to {}", images.len(), a.output.display());
    if written == 0 {
        return Err(CliError::usage("no image could be preprocessed"));
    }
    Ok(())
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// Directory of masks (64×64 images are used as-is, others preprocessed).
    data: PathBuf,
    #[arg(long, default_value_t = 16)]
    latent: usize,
    #[arg(long, default_value_t = 50)]
    epochs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Weight β on the KL term.
    #[arg(long, default_value_t = 1.0)]
    kl_weight: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Loss-curve CSV path [default: <out>.loss.csv].
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

pub fn train(a: TrainArgs) -> CmdResult {
    let loss_csv = a.loss_csv.clone().unwrap_or_else(|| {
        let mut p = a.out.as_os_str().to_owned();
        p.push(".loss.csv");
        p.into()
    });
    let cfg = [
        ("data", a.data.display().to_string()),
        ("latent", a.latent.to_string()),
        ("epochs", a.epochs.to_string()),
        ("seed", a.seed.to_string()),
        ("batch_size", a.batch_size.to_string()),
        ("lr", a.lr.to_string()),
        ("kl_weight", a.kl_weight.to_string()),
        ("threshold", a.threshold.to_string()),
        ("out", a.out.display().to_string()),
        ("loss_csv", loss_csv.display().to_string()),
    ];
    log_config("train", &cfg);
    if a.latent == 0 {
        return Err(CliError::usage("--latent must be positive"));
    }
    if !(a.lr > 0.0) {
        return Err(CliError::usage("--lr must be positive"));
    }
    let masks = load_masks(&a.data, a.threshold)?;
    if a.epochs == 0 {
        eprintln!("warning: --epochs 0 writes the initial weights untrained");
    }
    let tc = TrainConfig {
        latent_dim: a.latent,
        epochs: a.epochs,
        batch_size: a.batch_size,
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
        kl_weight: a.kl_weight,
        seed: a.seed,
    };
    let mut curve = String::from("epoch,mean_loss,mean_bce\n");
    let model = train_with(&masks, &tc, |s| {
        eprintln!("epoch {:>3}/{}: loss {:.3} bce {:.3}", s.epoch, a.epochs, s.mean_loss, s.mean_bce);
        writeln!(curve, "{},{:.6},{:.6}", s.epoch, s.mean_loss, s.mean_bce).unwrap();
    })?;
    ensure_parent(&a.out)?;
    save_model(&model, &a.out)?;
    write_file(&loss_csv, curve.as_bytes())?;
    write_meta(&loss_csv, "train", &cfg)?;
    eprintln!("wrote {} ({} masks)", a.out.display(), masks.len());
    Ok(())
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct ScoreArgs {
    /// Directory of masks.
    data: PathBuf,
    /// Checkpoint of the latent-16 model.
    #[arg(long)]
    vae16: Option<PathBuf>,
    /// Checkpoint of the latent-64 model.
    #[arg(long)]
    vae64: Option<PathBuf>,
    /// Measures entering the combined scores; `vae` also enables VAE scoring.
    /// fill, compression and fft columns are always written.
    #[arg(long, default_value = "compression,fft,vae")]
    measures: String,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for scoring.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
    /// Recorded in the metadata; scoring itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_slot(path: &Path, latent: usize) -> Result<shapecx::VaeModel, CliError> {
    load_model_for_slot(path, latent).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn score(a: ScoreArgs) -> CmdResult {
    let components = parse_components(&a.measures)?;
    let names: Vec<&str> = components.iter().map(|c| c.name()).collect();
    let cfg = [
        ("data", a.data.display().to_string()),
        ("measures", names.join(",")),
        ("vae16", a.vae16.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        ("vae64", a.vae64.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        ("out", a.out.display().to_string()),
        ("threshold", a.threshold.to_string()),
        ("deflate_level", DEFLATE_LEVEL.to_string()),
        ("seed", a.seed.to_string()),
    ];
    log_config("score", &cfg);
    eprintln!("jobs={}", a.jobs);
    let models = if components.contains(&Component::Vae) {
        let (Some(p16), Some(p64)) = (&a.vae16, &a.vae64) else {
            return Err(CliError::usage("measure `vae` needs both --vae16 and --vae64"));
        };
        Some((load_slot(p16, 16)?, load_slot(p64, 64)?))
    } else {
        None
    };
    let masks = load_masks(&a.data, a.threshold)?;
    let jobs = a.jobs.max(1);
    let mut scores = par_map(&masks, jobs, ScoreVector::of);
    if let Some((m16, m64)) = &models {
        for (s, cs) in scores.iter_mut().zip(vae_complexity_many(m16, m64, &masks, jobs)) {
            match cs {
                Ok(v) => s.vae = Some(v),
                Err(Error::UndefinedScore(id)) => eprintln!("warning: `{id}` has no white pixels; vae left empty"),
                Err(e) => return Err(e.into()),
            }
        }
    }
    let mut rows: Vec<ScoreRow> = scores.into_iter().map(ScoreRow::new).collect();
    for r in &mut rows {
        r.combined = combine(&r.scores, &components).ok();
    }
    let complete: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].combined.is_some()).collect();
    if complete.len() >= 2 {
        let subset: Vec<ScoreVector> = complete.iter().map(|&i| rows[i].scores.clone()).collect();
        for (&i, v) in complete.iter().zip(combine_equalized(&subset, &components)?) {
            rows[i].combined_eq = Some(v);
        }
    }
    ensure_parent(&a.out)?;
    write_scores_csv(&rows, &a.out)?;
    write_meta(&a.out, "score", &cfg)?;
    eprintln!("scored {} masks into {}", rows.len(), a.out.display());
    Ok(())
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct RankArgs {
    /// Scores CSV written by `score`.
    scores: PathBuf,
    /// fill, compression, fft, vae, combined or combined_eq.
    #[arg(long, default_value = "combined")]
    by: String,
    /// Write a montage PNG of the ranking.
    #[arg(long, requires = "masks")]
    montage: Option<PathBuf>,
    /// Mask directory used for the montage.
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Also write the ranking CSV here (it always goes to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".to_owned())
}

pub fn rank(a: RankArgs) -> CmdResult {
    let measure: Measure = a.by.parse()?;
    let cfg = [
        ("scores", a.scores.display().to_string()),
        ("by", measure.to_string()),
        ("montage", a.montage.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        ("seed", "none".to_owned()),
    ];
    log_config("rank", &cfg);
    let rows = read_scores_csv(&a.scores)?;
    if measure == Measure::CombinedEq && rows.len() < 2 {
        return Err(CliError::usage(format!(
            "combined_eq ranks a batch and needs at least 2 shapes, the CSV has {}",
            rows.len()
        )));
    }
    let mut pairs = Vec::with_capacity(rows.len());
    for r in &rows {
        let v = match measure {
            Measure::Single(c) => r.scores.get(c),
            Measure::Combined => r.combined,
            Measure::CombinedEq => r.combined_eq,
        };
        let v = v.ok_or_else(|| CliError::usage(format!("`{}` has no {measure} value", r.scores.id)))?;
        pairs.push((r.scores.id.clone(), v));
    }
    let ranking = rank_scores(&pairs)?;
    let mut text = String::from("position,id,score,rank\n");
    for (i, (id, v, r)) in ranking.entries().iter().enumerate() {
        writeln!(text, "{},{id},{v:.6},{r}", i + 1).unwrap();
    }
    print!("{text}");
    if let Some(out) = &a.out {
        write_file(out, text.as_bytes())?;
    }
    if let (Some(path), Some(dir)) = (&a.montage, &a.masks) {
        let masks = load_masks(dir, a.threshold)?;
        let by_id: std::collections::HashMap<&str, &ScoreRow> = rows.iter().map(|r| (r.scores.id.as_str(), r)).collect();
        let labels = |id: &str| -> Vec<String> {
            let r = by_id[id];
            match measure {
                // Top to bottom: FFT, compression, VAE.
                Measure::Combined | Measure::CombinedEq => {
                    vec![fmt_opt(Some(r.scores.fft)), fmt_opt(Some(r.scores.compression)), fmt_opt(r.scores.vae)]
                }
                Measure::Single(c) => vec![fmt_opt(r.scores.get(c))],
            }
        };
        ensure_parent(path)?;
        render_montage(&ranking, &masks, labels, path)?;
        eprintln!("wrote montage {}", path.display());
    }
    Ok(())
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    /// Scores CSV written by `score`.
    scores: PathBuf,
    /// Reference ranking: one id per line, least complex first.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    subset_trials: usize,
    #[arg(long, default_value_t = 9)]
    subset_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV.
    #[arg(long)]
    out: PathBuf,
    /// With --reference: also plot rank pairs as SVG.
    #[arg(long, requires = "reference")]
    scatter: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let rows = read_scores_csv(&a.scores)?;
    let scores: Vec<ScoreVector> = rows.into_iter().map(|r| r.scores).collect();
    let has_vae = !scores.is_empty() && scores.iter().all(|s| s.vae.is_some());
    let components: Vec<Component> = if has_vae {
        Component::COMBINED.to_vec()
    } else {
        vec![Component::Compression, Component::Fft]
    };
    let mut measures: Vec<Measure> = components.iter().map(|&c| Measure::Single(c)).collect();
    measures.push(Measure::Combined);
    let names: Vec<&str> = measures.iter().map(|m| m.name()).collect();
    let mode = if a.reference.is_some() { "reference" } else { "subset" };
    let cfg = [
        ("scores", a.scores.display().to_string()),
        ("mode", mode.to_owned()),
        ("reference", a.reference.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        ("subset_trials", a.subset_trials.to_string()),
        ("subset_k", a.subset_k.to_string()),
        ("measures", names.join(",")),
        ("seed", a.seed.to_string()),
        ("out", a.out.display().to_string()),
    ];
    log_config("eval", &cfg);
    let report = if let Some(ref_path) = &a.reference {
        let reference = ReferenceRanking::read(ref_path)?;
        let cmp = compare_to_reference(&scores, &measures, &components, &reference)?;
        let mut text = String::from("measure,spearman,slope,intercept,n\n");
        for c in &cmp {
            writeln!(text, "{},{:.6},{:.6},{:.6},{}", c.measure, c.spearman, c.slope, c.intercept, c.pairs.len()).unwrap();
        }
        if let Some(svg) = &a.scatter {
            let series = cmp
                .iter()
                .map(|c| Series {
                    name: c.measure.to_string(),
                    points: c.pairs.clone(),
                })
                .collect();
            ensure_parent(svg)?;
            render_scatter(&RankScatter { series, n: scores.len() }, svg)?;
        }
        text
    } else {
        subset_experiment(&scores, &measures, &components, a.subset_k, a.subset_trials, a.seed)?.to_csv()
    };
    print!("{report}");
    write_file(&a.out, report.as_bytes())?;
    write_meta(&a.out, "eval", &cfg)?;
    Ok(())
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct GenerateArgs {
    /// Output directory.
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn generate(a: GenerateArgs) -> CmdResult {
    log_config(
        "generate",
        &[
            ("out", a.out.display().to_string()),
            ("count", a.count.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    for m in desk_corpus(a.count, a.seed) {
        save_pgm(&m.to_raw(), a.out.join(format!("{}.pgm", m.id())))?;
    }
    eprintln!("wrote {} masks to {}", a.count, a.out.display());
    Ok(())
}

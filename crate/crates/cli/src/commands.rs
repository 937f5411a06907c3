use std::path::{Path, PathBuf};
use std::sync::Arc;

use dnbg::baseline::zero_filled;
use dnbg::config::RunConfig;
use dnbg::io::{read_kspace, read_mask, write_kspace, write_mask, DType, Dataset};
use dnbg::linops::{default_levels, dwt2};
use dnbg::metrics::{gini_index, psnr};
use dnbg::phantom::generate_phantom;
use dnbg::pipeline::{reconstruct_all, reconstruct_sequence, SequenceJob, Variant};
use dnbg::sampling::{mask_for_rate, measure_sequence, KSpaceFrame, SamplingMask};
use dnbg::ComplexImage;
use clap::ValueEnum;
use rayon::prelude::*;

use crate::args::*;
use crate::error::{CliError, Result};
use crate::report::{self, DiagnosticRow, EvaluationRow, FrameRow, SweepRow, Table};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Mask(a) => mask(a),
        Command::Phantom(a) => phantom(a),
        Command::Sample(a) => sample(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn mask(a: MaskArgs) -> Result<()> {
    let m = match (a.rate, a.rays) {
        (Some(rate), _) => mask_for_rate(a.side, rate)?,
        (None, Some(rays)) => SamplingMask::radial(a.side, rays, 0.0)?,
        (None, None) => return Err(CliError::usage("give either --rate or --rays")),
    };
    write_mask(&m, &a.out)?;
    eprintln!("{} rays, rate {:.4}", m.num_rays(), m.rate());
    Ok(())
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let d = generate_phantom(a.side, a.frames, a.amplitude, a.seed)?;
    let d = match a.dtype {
        DTypeArg::Real32 => d,
        DTypeArg::Complex64 => Dataset::from_images(&d.frames(), DType::Complex64, 1.0)?,
    };
    d.write(&a.out)?;
    Ok(())
}

fn load_mask(path: Option<&Path>, side: usize, rate: f64) -> Result<Arc<SamplingMask>> {
    let m = match path {
        Some(p) => read_mask(p)?,
        None => mask_for_rate(side, rate)?,
    };
    if m.side() != side {
        return Err(dnbg::Error::Dimension(format!("mask is {0}x{0}, dataset is {side}x{side}", m.side())).into());
    }
    Ok(Arc::new(m))
}

fn sample(a: SampleArgs) -> Result<()> {
    let d = Dataset::read(&a.dataset)?;
    let first = load_mask(a.first_mask.as_deref(), d.side(), a.first_rate)?;
    let rest = load_mask(a.mask.as_deref(), d.side(), a.rate)?;
    let frames = measure_sequence(&d.frames(), &first, &rest, a.noise, a.seed)?;
    write_kspace(&frames, &a.out)?;
    Ok(())
}

fn effective_config(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = o.iters {
        cfg.max_iters = v;
    }
    if let Some(v) = o.groups {
        cfg.num_groups = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if o.noiseless {
        cfg.noiseless = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_frames(path: &Path) -> Result<Vec<KSpaceFrame>> {
    let frames = read_kspace(path)?;
    if frames.is_empty() {
        return Err(dnbg::Error::Format(format!("{} holds no frames", path.display())).into());
    }
    if let Some((t, y)) = frames.iter().enumerate().find(|(t, y)| y.frame_index() != t + 1) {
        return Err(dnbg::Error::Format(format!(
            "{}: entry {} is numbered {}; frames must be numbered 1, 2, ...",
            path.display(),
            t + 1,
            y.frame_index()
        ))
        .into());
    }
    Ok(frames)
}

/// Frames of a dataset, checked against the reconstruction grid.
fn read_images(stem: &Path, side: usize, min_frames: usize) -> Result<Vec<ComplexImage>> {
    let d = Dataset::read(stem)?;
    if d.side() != side || d.num_frames() < min_frames {
        return Err(dnbg::Error::Dimension(format!(
            "{} is {}x{}x{}, need {side}x{side} with at least {min_frames} frames",
            stem.display(),
            d.num_frames(),
            d.side(),
            d.side()
        ))
        .into());
    }
    Ok(d.frames())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes every artifact of one finished frame.
struct FrameWriter<'a> {
    dir: PathBuf,
    truth: Option<&'a [ComplexImage]>,
    zf_psnr: Vec<Option<f64>>,
    diagnostics: Table,
    summary: Table,
    images: Vec<ComplexImage>,
}

impl<'a> FrameWriter<'a> {
    fn new(dir: &Path, truth: Option<&'a [ComplexImage]>, frames: &[KSpaceFrame]) -> Result<Self> {
        create_dir(&dir.join("frames"))?;
        let zf_psnr = frames
            .iter()
            .enumerate()
            .map(|(t, y)| truth.map(|tr| psnr(&zero_filled(y), &tr[t])).transpose())
            .collect::<dnbg::Result<_>>()?;
        Ok(FrameWriter {
            dir: dir.to_path_buf(),
            truth,
            zf_psnr,
            diagnostics: Table::create(Some(&dir.join("diagnostics.csv")))?,
            summary: Table::create(Some(&dir.join("frames.csv")))?,
            images: Vec::new(),
        })
    }

    fn push(&mut self, index: usize, image: ComplexImage, rows: &[DiagnosticRow], converged: bool, seconds: f64) -> Result<()> {
        let stem = self.dir.join("frames").join(format!("frame_{index:04}"));
        Dataset::from_images(std::slice::from_ref(&image), DType::Complex64, 1.0)?.write(&stem)?;
        report::write_magnitude(&image, &stem.with_extension("png"))?;
        let truth = self.truth.map(|tr| &tr[index - 1]);
        if let Some(tr) = truth {
            let path = self.dir.join("frames").join(format!("error_{index:04}.png"));
            report::write_error_map(&image, tr, &path)?;
        }
        for r in rows {
            self.diagnostics.row(r)?;
        }
        self.diagnostics.flush()?;
        self.summary.row(&FrameRow {
            frame: index,
            psnr: truth.map(|tr| psnr(&image, tr)).transpose()?,
            zero_filled_psnr: self.zf_psnr[index - 1],
            iterations: rows.len(),
            converged,
            seconds,
        })?;
        self.summary.flush()?;
        self.images.push(image);
        Ok(())
    }

    fn finish(self) -> Result<()> {
        Dataset::from_images(&self.images, DType::Complex64, 1.0)?.write(&self.dir.join("recon"))?;
        Ok(())
    }
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let cfg = effective_config(&a.overrides)?;
    let frames = read_frames(&a.kspace)?;
    let side = frames[0].side();
    let truth = a.truth.as_deref().map(|p| read_images(p, side, frames.len())).transpose()?;
    let guide = a.guide.as_deref().map(|p| read_images(p, side, 1)).transpose()?;
    create_dir(&a.out)?;
    cfg.save(&a.out.join("config.toml"))?;
    let mut writer = FrameWriter::new(&a.out, truth.as_deref(), &frames)?;

    let variant = match a.method {
        Method::ZeroFilled => {
            for y in &frames {
                writer.push(y.frame_index(), zero_filled(y), &[], true, 0.0)?;
            }
            return writer.finish();
        }
        Method::Dnbg => Variant::Dnbg,
        Method::Ablation => Variant::Ablation,
    };
    let job = SequenceJob {
        config: &cfg,
        variant,
        guide: guide.as_ref().map(|g| &g[0]),
        truth: truth.as_deref(),
    };
    let mut sink_err = None;
    let outcome = reconstruct_sequence(job, frames, |f| {
        let rows: Vec<_> = f.diagnostics.iter().map(|r| DiagnosticRow::new(f.index, r)).collect();
        eprintln!(
            "frame {}: {} iterations, {:.1} s{}",
            f.index,
            rows.len(),
            f.seconds,
            f.psnr.map(|p| format!(", PSNR {p:.2} dB")).unwrap_or_default()
        );
        writer.push(f.index, f.image, &rows, f.converged, f.seconds).map_err(|e| {
            let msg = e.to_string();
            sink_err = Some(e);
            dnbg::Error::Format(msg)
        })
    });
    if let Some(e) = sink_err {
        return Err(e);
    }
    outcome?;
    writer.finish()
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let recon = Dataset::read(&a.recon)?;
    let truth = read_images(&a.truth, recon.side(), recon.num_frames())?;
    let levels = default_levels(recon.side());
    let mut table = Table::create(a.out.as_deref())?;
    for (t, x) in recon.frames().iter().enumerate() {
        let coeffs: Vec<f64> = dwt2(x, levels)?.as_slice().iter().map(|c| c.norm()).collect();
        table.row(&EvaluationRow {
            frame: t + 1,
            psnr: psnr(x, &truth[t])?,
            wavelet_gini: gini_index(&coeffs),
        })?;
    }
    table.flush()
}

fn with_param(base: &RunConfig, param: SweepParam, value: f64) -> Result<RunConfig> {
    let mut cfg = base.clone();
    let as_count = |v: f64| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(CliError::usage(format!("{v} is not a positive integer")))
        }
    };
    match param {
        SweepParam::Groups => cfg.num_groups = as_count(value)?,
        SweepParam::PatchArea => cfg.patch_area = as_count(value)?,
        SweepParam::Radius => cfg.radius = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

struct RunStats {
    psnr: f64,
    gini: f64,
    iteration_seconds: f64,
}

fn sweep_run(cfg: &RunConfig, frames: &[KSpaceFrame], truth: &[ComplexImage]) -> Result<RunStats> {
    let job = SequenceJob {
        config: cfg,
        variant: Variant::Dnbg,
        guide: None,
        truth: Some(truth),
    };
    let out = reconstruct_all(job, frames.to_vec())?;
    let n = out.len() as f64;
    let psnr = out.iter().filter_map(|f| f.psnr).sum::<f64>() / n;
    let last: Vec<_> = out.iter().filter_map(|f| f.diagnostics.last()).collect();
    let gini = last.iter().map(|r| r.gini).sum::<f64>() / last.len().max(1) as f64;
    let records: Vec<_> = out.iter().flat_map(|f| &f.diagnostics).collect();
    let iteration_seconds = records.iter().map(|r| r.seconds).sum::<f64>() / records.len().max(1) as f64;
    Ok(RunStats {
        psnr,
        gini,
        iteration_seconds,
    })
}

fn sweep(a: SweepArgs) -> Result<()> {
    if a.repeats == 0 || a.jobs == 0 {
        return Err(CliError::usage("--repeats and --jobs must be at least 1"));
    }
    let base = effective_config(&a.overrides)?;
    let frames = read_frames(&a.kspace)?;
    let truth = read_images(&a.truth, frames[0].side(), frames.len())?;
    let mut runs = Vec::new();
    for &value in &a.values {
        let cfg = with_param(&base, a.param, value)?;
        for r in 0..a.repeats {
            let seed = cfg.seed.checked_add(r as u64).ok_or_else(|| CliError::usage("seed overflow"))?;
            runs.push((value, RunConfig { seed, ..cfg.clone() }));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let stats: Vec<RunStats> = pool
        .install(|| runs.par_iter().map(|(_, cfg)| sweep_run(cfg, &frames, &truth)).collect::<Vec<_>>())
        .into_iter()
        .collect::<Result<_>>()?;

    let name = a.param.to_possible_value().expect("no skipped variants").get_name().to_string();
    let mut table = Table::create(a.out.as_deref())?;
    for (value, group) in a.values.iter().zip(stats.chunks(a.repeats)) {
        let psnrs: Vec<f64> = group.iter().map(|s| s.psnr).collect();
        let ginis: Vec<f64> = group.iter().map(|s| s.gini).collect();
        let secs: Vec<f64> = group.iter().map(|s| s.iteration_seconds).collect();
        let (psnr_mean, psnr_std) = report::mean_std(&psnrs);
        let (gini_mean, gini_std) = report::mean_std(&ginis);
        let (iteration_seconds_mean, iteration_seconds_std) = report::mean_std(&secs);
        table.row(&SweepRow {
            param: name.clone(),
            value: *value,
            runs: group.len(),
            psnr_mean,
            psnr_std,
            gini_mean,
            gini_std,
            iteration_seconds_mean,
            iteration_seconds_std,
        })?;
    }
    table.flush()
}

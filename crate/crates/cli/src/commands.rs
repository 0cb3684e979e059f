use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::Instant;

use s2haar::framelet::{decompose_level_into, default_depth, reconstruct_level_into, BANDS};
use s2haar::io::{self, Sph1};
use s2haar::metrics::{quality, Quality, SplitMix64};
use s2haar::partition::patch_count;
use s2haar::solver::grid_search;
use s2haar::{
    build_partition, decompose, denoise, from_equirectangular, gen_mask, inpaint, reconstruct,
    single_face_ingest, to_equirectangular, MaskSpec, SphericalSignal,
};
use serde_json::{json, Value};

use crate::config::{ColorMap, FileConfig, IngestMode};
use crate::{CliError, Command, InpaintArgs, Outcome, ViewFlags};

/// Largest relative error a forward transform may show on reconstruction.
const TRANSFORM_CHECK_TOL: f64 = 1e-10;

/// Per-level timing ratios expected of a linear-time transform.
const SCALING_RANGE: (f64, f64) = (3.0, 6.0);

pub fn dispatch(command: Command, file: &FileConfig) -> Result<Outcome, CliError> {
    match command {
        Command::PartitionInfo { level, splits } => {
            partition_info(require_level(level, file)?, splits)
        }
        Command::Ingest {
            input,
            output,
            level,
            mode,
            face,
        } => {
            let mode = mode.or(file.ingest.mode).unwrap_or(IngestMode::Equirect);
            let face = face.or(file.ingest.face).unwrap_or(0);
            ingest(&input, &output, require_level(level, file)?, mode, face)
        }
        Command::Render {
            input,
            output,
            view,
        } => render(&input, &output, &view, file),
        Command::Transform {
            input,
            output,
            depth,
            inverse,
        } => {
            if inverse {
                transform_inverse(&input, &output)
            } else {
                transform_forward(&input, &output, depth.or(file.depth))
            }
        }
        Command::Denoise {
            input,
            output,
            sigma,
            denoiser,
        } => {
            let spec = denoiser.resolve(&file.denoiser)?;
            let sig = io::read_signal(&input)?;
            let t = Instant::now();
            let out = denoise(&spec, &sig, sigma)?;
            let wall = t.elapsed().as_secs_f64();
            io::write_signal(&output, &out)?;
            Ok(Outcome {
                settings: json!({ "sigma": sigma, "denoiser": spec }),
                inputs: vec![input],
                outputs: vec![output],
                body: json!({ "level": sig.level(), "channels": sig.channel_count(), "wall_time_s": wall }),
                default_report: None,
            })
        }
        Command::Mask {
            level,
            ratio,
            seed,
            output,
        } => {
            let level = require_level(level, file)?;
            let ratio = ratio
                .or(file.mask.ratio)
                .ok_or_else(|| CliError::Usage("mask needs --ratio".into()))?;
            let spec = MaskSpec::new(ratio, seed.or(file.mask.seed).unwrap_or(0))?;
            let mask = gen_mask(level, &spec)?;
            io::write_mask(&output, &mask)?;
            Ok(Outcome {
                settings: json!({ "level": level, "mask": spec }),
                inputs: vec![],
                outputs: vec![output],
                body: json!({ "observed": mask.observed_count(), "total": patch_count(level) }),
                default_report: None,
            })
        }
        Command::Inpaint(args) => inpaint_cmd(*args, file),
        Command::Metrics { truth, test } => metrics(truth, test),
        Command::Bench { levels, reps, warm } => bench(&levels, reps, warm),
    }
}

fn require_level(level: Option<u32>, file: &FileConfig) -> Result<u32, CliError> {
    level.or(file.level).ok_or_else(|| {
        CliError::Usage("--level is required (or `level` in the config file)".into())
    })
}

fn partition_info(level: u32, with_splits: bool) -> Result<Outcome, CliError> {
    let t = Instant::now();
    let p = build_partition(level)?;
    let wall = t.elapsed().as_secs_f64();
    let meta = p.metadata();
    let mut body = json!({
        "level": level,
        "patches": p.leaf_count(),
        "face_order": meta.face_order,
        "leaf_areas": p.leaf_area_stats(),
        "build_time_s": wall,
    });
    if with_splits {
        body["splits"] = json!(meta.splits);
    }
    Ok(Outcome {
        settings: json!({ "level": level, "splits": with_splits }),
        inputs: vec![],
        outputs: vec![],
        body,
        default_report: None,
    })
}

fn ingest(
    input: &Path,
    output: &Path,
    level: u32,
    mode: IngestMode,
    face: usize,
) -> Result<Outcome, CliError> {
    let img = io::read_png(input)?;
    let p = build_partition(level)?;
    let sig = match mode {
        IngestMode::Equirect => from_equirectangular(&img, &p),
        IngestMode::SingleFace => single_face_ingest(&img, face, &p)?,
    };
    io::write_signal(output, &sig)?;
    let mode_name = match mode {
        IngestMode::Equirect => "equirect",
        IngestMode::SingleFace => "single-face",
    };
    Ok(Outcome {
        settings: json!({ "level": level, "mode": mode_name, "face": face }),
        inputs: vec![input.to_path_buf()],
        outputs: vec![output.to_path_buf()],
        body: json!({
            "image": { "width": img.width, "height": img.height, "channels": img.channels },
            "channels": sig.channel_count(),
        }),
        default_report: None,
    })
}

struct View {
    width: usize,
    height: usize,
    color_map: bool,
}

fn resolve_view(view: &ViewFlags, file: &FileConfig, sig: &SphericalSignal) -> View {
    let width = view
        .width
        .or(file.render.width)
        .unwrap_or_else(|| (16usize << sig.level().min(8)).min(4096));
    let height = view
        .height
        .or(file.render.height)
        .unwrap_or((width / 2).max(1));
    let color_map = match view
        .color_map
        .or(file.render.color_map)
        .unwrap_or(ColorMap::Auto)
    {
        ColorMap::Auto => sig.channel_count() == 1,
        ColorMap::Always => true,
        ColorMap::Never => false,
    };
    View {
        width,
        height,
        color_map,
    }
}

fn write_render(sig: &SphericalSignal, path: &Path, view: &View) -> Result<(), CliError> {
    let p = build_partition(sig.level())?;
    let img = to_equirectangular(sig, &p, view.width, view.height)?;
    io::write_png(path, &img, view.color_map)?;
    Ok(())
}

fn render(
    input: &Path,
    output: &Path,
    view: &ViewFlags,
    file: &FileConfig,
) -> Result<Outcome, CliError> {
    let sig = io::read_signal(input)?;
    let view = resolve_view(view, file, &sig);
    write_render(&sig, output, &view)?;
    let (lo, hi) = sig.min_max();
    Ok(Outcome {
        settings: json!({ "width": view.width, "height": view.height, "color_map": view.color_map }),
        inputs: vec![input.to_path_buf()],
        outputs: vec![output.to_path_buf()],
        body: json!({ "level": sig.level(), "channels": sig.channel_count(), "value_range": [lo, hi] }),
        default_report: None,
    })
}

fn transform_forward(input: &Path, output: &Path, depth: Option<u32>) -> Result<Outcome, CliError> {
    let sig = io::read_signal(input)?;
    let depth = depth.unwrap_or_else(|| default_depth(sig.level()));
    let t = Instant::now();
    let pyr = decompose(&sig, depth)?;
    let wall = t.elapsed().as_secs_f64();
    let back = reconstruct(&pyr)?;
    let rel = relative_error(&back, &sig);
    if rel.is_nan() || rel > TRANSFORM_CHECK_TOL {
        return Err(CliError::Check(format!(
            "reconstruction relative error {rel:e} exceeds {TRANSFORM_CHECK_TOL:e}"
        )));
    }
    io::write_pyramid(output, &pyr)?;
    Ok(Outcome {
        settings: json!({ "depth": depth, "inverse": false }),
        inputs: vec![input.to_path_buf()],
        outputs: vec![output.to_path_buf()],
        body: json!({
            "level": sig.level(),
            "channels": sig.channel_count(),
            "coefficients_per_channel": pyr.channel(0).len(),
            "reconstruction_rel_error": rel,
            "wall_time_s": wall,
        }),
        default_report: None,
    })
}

fn transform_inverse(input: &Path, output: &Path) -> Result<Outcome, CliError> {
    let pyr = match io::read_sph1(input)? {
        Sph1::Pyramid(p) => p,
        _ => {
            return Err(CliError::Usage(format!(
                "{} is not an SPH1 pyramid",
                input.display()
            )))
        }
    };
    let t = Instant::now();
    let sig = reconstruct(&pyr)?;
    let wall = t.elapsed().as_secs_f64();
    io::write_signal(output, &sig)?;
    Ok(Outcome {
        settings: json!({ "depth": pyr.depth(), "inverse": true }),
        inputs: vec![input.to_path_buf()],
        outputs: vec![output.to_path_buf()],
        body: json!({ "level": sig.level(), "channels": sig.channel_count(), "wall_time_s": wall }),
        default_report: None,
    })
}

fn relative_error(x: &SphericalSignal, reference: &SphericalSignal) -> f64 {
    let num: f64 = x
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn signal_quality(x: &SphericalSignal, truth: &SphericalSignal) -> Result<Quality, CliError> {
    if !x.same_shape(truth) {
        return Err(
            s2haar::Error::Shape("ground truth shape differs from the signal".into()).into(),
        );
    }
    Ok(quality(
        &x.iter().collect::<Vec<_>>(),
        &truth.iter().collect::<Vec<_>>(),
    )?)
}

fn inpaint_cmd(args: InpaintArgs, file: &FileConfig) -> Result<Outcome, CliError> {
    let params = args.solver.resolve(&file.solver)?;
    let spec = args.denoiser.resolve(&file.denoiser)?;
    let input = io::read_signal(&args.input)?;
    let level = input.level();
    let mut inputs = vec![args.input.clone()];

    let (mask, mask_settings, synthetic) = match &args.mask {
        Some(path) => {
            inputs.push(path.clone());
            (io::read_mask(path)?, json!({ "file": path }), false)
        }
        None => {
            let ratio = args
                .ratio
                .or(file.mask.ratio)
                .ok_or_else(|| CliError::Usage("inpaint needs --mask or --ratio".into()))?;
            let spec = MaskSpec::new(ratio, args.seed.or(file.mask.seed).unwrap_or(0))?;
            (gen_mask(level, &spec)?, json!(spec), true)
        }
    };
    let truth = match &args.truth {
        Some(path) => {
            inputs.push(path.clone());
            Some(io::read_signal(path)?)
        }
        // A generated mask degrades a complete input, which is then the truth.
        None if synthetic => Some(input.clone()),
        None => None,
    };
    let observed = SphericalSignal::from_channels(
        level,
        input.channels().iter().map(|c| mask.apply(c)).collect(),
    )?;

    let (restored, mut body) = if args.grid {
        let truth = truth.as_ref().ok_or_else(|| {
            CliError::Usage("--grid needs ground truth (--truth or --ratio)".into())
        })?;
        let t = Instant::now();
        let (out, grid) = grid_search(&observed, &mask, &params, &spec, truth)?;
        let wall = t.elapsed().as_secs_f64();
        let metrics = grid.best.quality;
        (
            out,
            json!({ "grid": grid, "metrics": metrics, "wall_time_s": wall }),
        )
    } else {
        let (out, mut run) = inpaint(&observed, &mask, &params, &spec)?;
        if let Some(truth) = &truth {
            run.metrics = Some(signal_quality(&out, truth)?);
        }
        (out, json!({ "run": run, "metrics": run.metrics }))
    };
    if let Some(truth) = &truth {
        let baseline = SphericalSignal::from_channels(
            level,
            observed
                .channels()
                .iter()
                .map(|c| mask.mean_fill(c))
                .collect::<Result<_, _>>()?,
        )?;
        body["mean_fill_metrics"] = json!(signal_quality(&baseline, truth)?);
    }
    body["observed"] = json!(mask.observed_count());
    body["total"] = json!(mask.flags().len());

    io::write_signal(&args.output, &restored)?;
    let png = args
        .png
        .clone()
        .unwrap_or_else(|| args.output.with_extension("png"));
    let view = resolve_view(&args.view, file, &restored);
    write_render(&restored, &png, &view)?;

    Ok(Outcome {
        settings: json!({
            "level": level,
            "solver": params,
            "depth": params.depth_for(level)?,
            "sigma": params.sigma(),
            "denoiser": spec,
            "mask": mask_settings,
            "grid": args.grid,
            "render": { "width": view.width, "height": view.height, "color_map": view.color_map },
        }),
        inputs,
        outputs: vec![args.output.clone(), png],
        body,
        default_report: Some(args.output.with_extension("json")),
    })
}

enum Loaded {
    Signal(SphericalSignal),
    Image(s2haar::PlanarImage),
}

fn load_any(path: &Path) -> Result<Loaded, CliError> {
    let mut magic = [0u8; 4];
    let head = std::fs::File::open(path)
        .and_then(|mut f| std::io::Read::read_exact(&mut f, &mut magic))
        .is_ok();
    if head && &magic == b"SPH1" {
        Ok(Loaded::Signal(io::read_signal(path)?))
    } else {
        Ok(Loaded::Image(io::read_png(path)?))
    }
}

fn metrics(truth: PathBuf, test: PathBuf) -> Result<Outcome, CliError> {
    let q = match (load_any(&truth)?, load_any(&test)?) {
        (Loaded::Signal(a), Loaded::Signal(b)) => signal_quality(&b, &a)?,
        (Loaded::Image(a), Loaded::Image(b)) => {
            if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
                return Err(
                    s2haar::Error::Shape("images differ in size or channel count".into()).into(),
                );
            }
            quality(&b.data, &a.data)?
        }
        _ => {
            return Err(CliError::Usage(
                "compare two SPH1 signals or two PNG images, not one of each".into(),
            ))
        }
    };
    Ok(Outcome {
        settings: json!({}),
        inputs: vec![truth, test],
        outputs: vec![],
        body: serde_json::to_value(q).expect("quality serializes"),
        default_report: None,
    })
}

fn parse_levels(text: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::Usage(format!("--levels expects a..b with a ≤ b, got {text:?}"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let (a, b) = (
        a.trim().parse::<u32>().map_err(|_| bad())?,
        b.trim().parse::<u32>().map_err(|_| bad())?,
    );
    if a == 0 || a > b || b > s2haar::partition::DEFAULT_MAX_LEVEL {
        return Err(CliError::Usage(format!(
            "--levels must satisfy 1 ≤ a ≤ b ≤ {}",
            s2haar::partition::DEFAULT_MAX_LEVEL
        )));
    }
    Ok((a, b))
}

/// Overwrites a buffer larger than the last-level cache so each timed run
/// starts cold, making levels comparable regardless of which fit in cache.
fn evict(scratch: &mut [u64]) {
    for (i, w) in scratch.iter_mut().enumerate().step_by(8) {
        *w = w.wrapping_add(i as u64);
    }
    black_box(scratch);
}

fn bench(levels: &str, reps: usize, warm: bool) -> Result<Outcome, CliError> {
    let (lo, hi) = parse_levels(levels)?;
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let mut scratch = if warm {
        Vec::new()
    } else {
        vec![0u64; 32 << 20]
    };
    let mut rows: Vec<Value> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut within = true;
    eprintln!(
        "{:>5} {:>10} {:>14} {:>8} {:>16} {:>8}",
        "J", "samples", "decompose ms", "ratio", "reconstruct ms", "ratio"
    );
    for level in lo..=hi {
        let n = patch_count(level);
        let mut rng = SplitMix64::new(u64::from(level));
        let fine: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let (mut low, mut details, mut back) =
            (vec![0.0; n / 4], vec![0.0; BANDS * n / 4], vec![0.0; n]);
        let mut time = |f: &mut dyn FnMut() -> s2haar::Result<()>| -> Result<f64, CliError> {
            let mut best = f64::INFINITY;
            for _ in 0..=reps {
                evict(&mut scratch);
                let t = Instant::now();
                f()?;
                best = best.min(t.elapsed().as_secs_f64());
            }
            Ok(best)
        };
        let td = time(&mut || decompose_level_into(black_box(&fine), &mut low, &mut details))?;
        let tr =
            time(&mut || reconstruct_level_into(black_box(&low), black_box(&details), &mut back))?;
        if (0..n).any(|i| (back[i] - fine[i]).abs() > 1e-12) {
            return Err(CliError::Check(format!(
                "level {level} round trip is not exact"
            )));
        }
        let ratios = prev.map(|(pd, pr)| (td / pd, tr / pr));
        if let Some((rd, rr)) = ratios {
            let ok = |r: f64| (SCALING_RANGE.0..=SCALING_RANGE.1).contains(&r);
            within &= ok(rd) && ok(rr);
        }
        let fmt = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{r:.2}"));
        eprintln!(
            "{level:>5} {n:>10} {:>14.3} {:>8} {:>16.3} {:>8}",
            td * 1e3,
            fmt(ratios.map(|r| r.0)),
            tr * 1e3,
            fmt(ratios.map(|r| r.1))
        );
        rows.push(json!({
            "level": level,
            "samples": n,
            "decompose_s": td,
            "reconstruct_s": tr,
            "decompose_ratio": ratios.map(|r| r.0),
            "reconstruct_ratio": ratios.map(|r| r.1),
        }));
        prev = Some((td, tr));
    }
    Ok(Outcome {
        settings: json!({ "levels": [lo, hi], "reps": reps, "cold_cache": !warm }),
        inputs: vec![],
        outputs: vec![],
        body: json!({
            "rows": rows,
            "expected_ratio": [SCALING_RANGE.0, SCALING_RANGE.1],
            "ratios_within_expected": within,
            "threads": std::thread::available_parallelism().map_or(1, |n| n.get()),
        }),
        default_report: None,
    })
}

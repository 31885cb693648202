use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{CliError, EvalArgs, RunConfig, SegmentArgs, SynthArgs, VizArgs};
use crate::evaluation::{
    binary_background_scores, binary_scores, bootstrap_iou, hungarian_sequence_match, linear_assignment_score,
    select_foreground_subset, write_davis_csv, EvalError, VideoScores,
};
use crate::flow_io::{flow_to_hsv, read_flo, resample_volume, write_flo, FlowVolume, HsvNormalization, RgbImage};
use crate::labels::{LabelMap, LabelMaskSequence};
use crate::png_io::{colorize, read_label_png, write_label_png, write_rgb_png};
use crate::segmenter::{segment, SegmentationResult};
use crate::synthgen::{generate, SceneSpec};

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Files in `dir` with extension `ext`, in lexicographic filename order.
fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)) {
            out.push(path);
        }
    }
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(out)
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "video".into())
}

/// A directory of flows is one video; otherwise each subdirectory holding
/// flows is a video.
fn videos(input: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>, CliError> {
    if !input.is_dir() {
        return Err(CliError::Input(format!("{} is not a directory", input.display())));
    }
    if !files_with_ext(input, ext)?.is_empty() {
        return Ok(vec![(name(input), input.to_path_buf())]);
    }
    let mut out = Vec::new();
    for dir in subdirs(input)? {
        if !files_with_ext(&dir, ext)?.is_empty() {
            out.push((name(&dir), dir));
        }
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("no .{ext} files in {}", input.display())));
    }
    Ok(out)
}

fn read_volume(paths: &[PathBuf]) -> Result<FlowVolume, CliError> {
    let frames = paths.iter().map(read_flo).collect::<Result<Vec<_>, _>>().map_err(input_err)?;
    FlowVolume::new(frames).map_err(input_err)
}

/// Runs the segmenter on one video directory and writes its outputs.
pub fn segment_video(input: &Path, output: &Path, config: &RunConfig) -> Result<SegmentationResult, CliError> {
    let paths = files_with_ext(input, "flo")?;
    if paths.is_empty() {
        return Err(CliError::Input(format!("no .flo files in {}", input.display())));
    }
    let volume = read_volume(&paths)?;
    let (w0, h0) = (volume.width(), volume.height());
    let working = if (w0, h0) == (config.width, config.height) {
        volume.clone()
    } else {
        resample_volume(&volume, config.width, config.height)
    };
    let result = segment(&working, &config.segmenter).map_err(|e| match e {
        crate::segmenter::SegmentError::Config(m) => CliError::Config(m),
        other => CliError::Input(other.to_string()),
    })?;

    let labels_dir = output.join("labels");
    create_dir(&labels_dir)?;
    let labels = result.hard_labels(config.width, config.height);
    let full: Vec<LabelMap> = labels.iter().map(|m| m.resize_nearest(w0, h0)).collect();
    for (path, map) in paths.iter().zip(&full) {
        write_label_png(map, labels_dir.join(format!("{}.png", stem(path)))).map_err(input_err)?;
    }

    let loss_path = output.join("loss.csv");
    let mut csv = csv::Writer::from_path(&loss_path).map_err(input_err)?;
    csv.write_record(["iter", "L_r", "L_c", "total"]).map_err(input_err)?;
    for (i, b) in result.trace.iter().enumerate() {
        csv.write_record([(i + 1).to_string(), format!("{:?}", b.l_r), format!("{:?}", b.l_c), format!("{:?}", b.total)])
            .map_err(input_err)?;
    }
    csv.flush().map_err(|e| io_err(&loss_path, e))?;

    let mut models = String::new();
    for (k, m) in result.models.iter().enumerate() {
        for line in m.to_string().lines() {
            models.push_str(&format!("segment.{k}.{line}\n"));
        }
    }
    write_text(&output.join("models.txt"), &models)?;

    let mut manifest = format!(
        "# motionseg run manifest\nversion={}\ninput={}\noutput={}\n",
        env!("CARGO_PKG_VERSION"),
        input.display(),
        output.display()
    );
    manifest.push_str(&config.to_text());
    manifest.push_str(&format!("# frames={} original={w0}x{h0} occlusion_lambda={}\n", paths.len(), result.lambda));
    for w in &result.warnings {
        manifest.push_str(&format!("# warning: {w}\n"));
        eprintln!("motionseg: {}: {w}", input.display());
    }
    write_text(&output.join("manifest.txt"), &manifest)?;

    if config.viz {
        let viz = output.join("viz");
        create_dir(&viz)?;
        for ((path, field), map) in paths.iter().zip(volume.frames()).zip(&full) {
            let s = stem(path);
            write_rgb_png(&flow_to_hsv(field, HsvNormalization::PerFrame), viz.join(format!("flow_{s}.png")))
                .map_err(input_err)?;
            write_rgb_png(&colorize(map), viz.join(format!("labels_{s}.png"))).map_err(input_err)?;
        }
    }
    Ok(result)
}

pub fn cmd_segment(args: &SegmentArgs) -> Result<(), CliError> {
    let config = args.run_config()?;
    let list = videos(&args.input, "flo")?;
    if list.len() == 1 && list[0].1 == args.input {
        return segment_video(&args.input, &args.output, &config).map(|_| ());
    }
    // Bounded pool over videos; each video runs sequentially.
    let next = AtomicUsize::new(0);
    let errors: Mutex<Vec<(usize, CliError)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..config.jobs.min(list.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((video, dir)) = list.get(i) else { break };
                if let Err(e) = segment_video(dir, &args.output.join(video), &config) {
                    errors.lock().expect("no poisoned lock").push((i, e));
                }
            });
        }
    });
    let mut errors = errors.into_inner().expect("no poisoned lock");
    errors.sort_by_key(|(i, _)| *i);
    match errors.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Largest predicted segment is background, the rest foreground.
    Binary,
    /// Foreground is the best subset of predicted labels.
    BinarySelect,
    MultiHungarian,
    Biou,
    Linear,
}

impl FromStr for EvalMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Self::Binary),
            "binary-select" => Ok(Self::BinarySelect),
            "multi-hungarian" => Ok(Self::MultiHungarian),
            "biou" => Ok(Self::Biou),
            "linear" => Ok(Self::Linear),
            _ => Err(format!("unknown mode `{s}` (binary|binary-select|multi-hungarian|biou|linear)")),
        }
    }
}

/// Uses `dir/sub` when it exists, so segment and synth outputs can be passed directly.
fn png_root(dir: &Path, sub: &str) -> PathBuf {
    let nested = dir.join(sub);
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

/// Predicted frames in filename order, with the ground truth of the same name where present.
fn load_pair(pred_dir: &Path, gt_dir: &Path) -> Result<(LabelMaskSequence, LabelMaskSequence), CliError> {
    let pred_paths = files_with_ext(pred_dir, "png")?;
    if pred_paths.is_empty() {
        return Err(CliError::Input(format!("no label PNGs in {}", pred_dir.display())));
    }
    let mut pred = Vec::new();
    let mut gt = Vec::new();
    for p in &pred_paths {
        pred.push(Some(read_label_png(p).map_err(input_err)?));
        let g = gt_dir.join(p.file_name().expect("file path"));
        gt.push(if g.is_file() { Some(read_label_png(&g).map_err(input_err)?) } else { None });
    }
    let dims = |s: &[Option<LabelMap>]| -> Result<(), CliError> {
        let mut d = s.iter().flatten().map(|m| (m.width(), m.height()));
        if let Some(first) = d.next() {
            if d.any(|x| x != first) {
                return Err(CliError::Input("label frames differ in size".into()));
            }
        }
        Ok(())
    };
    dims(&pred)?;
    dims(&gt)?;
    Ok((LabelMaskSequence::new(pred), LabelMaskSequence::new(gt)))
}

fn eval_err(e: EvalError) -> CliError {
    CliError::Input(e.to_string())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let mode: EvalMode = args.mode.parse().map_err(CliError::Config)?;
    let pred_root = png_root(&args.pred, "labels");
    let gt_root = png_root(&args.gt, "gt");
    if !pred_root.is_dir() || !gt_root.is_dir() {
        return Err(CliError::Input("prediction and ground-truth paths must be directories".into()));
    }
    let list: Vec<(String, PathBuf, PathBuf)> = if !files_with_ext(&pred_root, "png")?.is_empty() {
        vec![(name(&args.pred), pred_root, gt_root)]
    } else {
        let mut out = Vec::new();
        for dir in subdirs(&pred_root)? {
            let video = name(&dir);
            out.push((video.clone(), png_root(&dir, "labels"), png_root(&gt_root.join(&video), "gt")));
        }
        out
    };
    if list.is_empty() {
        return Err(CliError::Input(format!("no label PNGs under {}", args.pred.display())));
    }

    let mut buf = Vec::new();
    match mode {
        EvalMode::Binary | EvalMode::BinarySelect => {
            let mut rows = Vec::new();
            for (video, p, g) in &list {
                let (pred, gt) = load_pair(p, g)?;
                let (j, f) = if mode == EvalMode::Binary {
                    binary_background_scores(&pred, &gt).map_err(eval_err)?
                } else {
                    let (set, induced) = select_foreground_subset(&pred, &gt).map_err(eval_err)?;
                    eprintln!("motionseg: {video}: foreground labels {set:?} (nonempty proper subsets searched)");
                    binary_scores(&induced, &gt).map_err(eval_err)?
                };
                rows.push(VideoScores { video: video.clone(), j, f });
            }
            write_davis_csv(&rows, &mut buf).map_err(eval_err)?;
        }
        EvalMode::MultiHungarian => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["video", "J", "F", "J&F"]).map_err(input_err)?;
            let mut sums = [0.0; 3];
            for (video, p, g) in &list {
                let (pred, gt) = load_pair(p, g)?;
                let r = hungarian_sequence_match(&pred, &gt).map_err(eval_err)?;
                let vals = [r.j_mean, r.f_mean, r.jf];
                sums.iter_mut().zip(vals).for_each(|(s, v)| *s += v);
                w.write_record(std::iter::once(video.clone()).chain(vals.iter().map(|v| format!("{v:.6}"))))
                    .map_err(input_err)?;
            }
            let n = list.len() as f64;
            w.write_record(std::iter::once("mean".to_string()).chain(sums.iter().map(|s| format!("{:.6}", s / n))))
                .map_err(input_err)?;
            w.flush().map_err(|e| CliError::Input(e.to_string()))?;
        }
        EvalMode::Biou | EvalMode::Linear => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["video", "score"]).map_err(input_err)?;
            let mut sum = 0.0;
            for (video, p, g) in &list {
                let (pred, gt) = load_pair(p, g)?;
                let s = if mode == EvalMode::Biou { bootstrap_iou(&pred, &gt) } else { linear_assignment_score(&pred, &gt) }
                    .map_err(eval_err)?;
                sum += s;
                w.write_record([video.clone(), format!("{s:.6}")]).map_err(input_err)?;
            }
            w.write_record(["mean".to_string(), format!("{:.6}", sum / list.len() as f64)]).map_err(input_err)?;
            w.flush().map_err(|e| CliError::Input(e.to_string()))?;
        }
    }
    match &args.output {
        Some(path) => fs::write(path, &buf).map_err(|e| io_err(path, e)),
        None => std::io::stdout().write_all(&buf).map_err(|e| CliError::Input(e.to_string())),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spec).map_err(|e| io_err(&args.spec, e))?;
    let spec: SceneSpec = text.parse().map_err(|e| CliError::Input(format!("{}: {e}", args.spec.display())))?;
    let scene = generate(&spec).map_err(input_err)?;
    let flow_dir = args.output.join("flow");
    let gt_dir = args.output.join("gt");
    create_dir(&flow_dir)?;
    create_dir(&gt_dir)?;
    for (t, (field, map)) in scene.volume.frames().iter().zip(scene.gt.frames().iter().flatten()).enumerate() {
        write_flo(field, flow_dir.join(format!("frame_{:04}.flo", t + 1))).map_err(input_err)?;
        write_label_png(map, gt_dir.join(format!("frame_{:04}.png", t + 1))).map_err(input_err)?;
    }
    let mut models = String::new();
    for (k, m) in scene.true_models.iter().enumerate() {
        for line in m.to_string().lines() {
            models.push_str(&format!("region.{k}.{line}\n"));
        }
    }
    write_text(&args.output.join("true_models.txt"), &models)?;
    write_text(&args.output.join("scene.txt"), &spec.to_string())
}

fn parse_scale(s: &str) -> Result<HsvNormalization, CliError> {
    match s {
        "frame" => Ok(HsvNormalization::PerFrame),
        "volume" => Ok(HsvNormalization::PerVolumeMax),
        other => match other.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(HsvNormalization::Fixed(v)),
            _ => Err(CliError::Config(format!("bad scale `{s}` (frame | volume | positive number)"))),
        },
    }
}

pub fn cmd_viz(args: &VizArgs) -> Result<(), CliError> {
    let scale = parse_scale(&args.scale)?;
    if !args.input.is_dir() {
        return Err(CliError::Input(format!("{} is not a directory", args.input.display())));
    }
    let flows = files_with_ext(&args.input, "flo")?;
    let mut images: Vec<(String, RgbImage)> = Vec::new();
    if !flows.is_empty() {
        let fields = flows.iter().map(read_flo).collect::<Result<Vec<_>, _>>().map_err(input_err)?;
        let scale = match scale {
            HsvNormalization::PerVolumeMax => {
                HsvNormalization::Fixed(fields.iter().map(|f| f.max_magnitude()).fold(0.0, f64::max).max(f64::MIN_POSITIVE))
            }
            s => s,
        };
        for (p, f) in flows.iter().zip(&fields) {
            images.push((stem(p), flow_to_hsv(f, scale)));
        }
    } else {
        let pngs = files_with_ext(&args.input, "png")?;
        if pngs.is_empty() {
            return Err(CliError::Input(format!("no .flo or .png files in {}", args.input.display())));
        }
        for p in &pngs {
            images.push((stem(p), colorize(&read_label_png(p).map_err(input_err)?)));
        }
    }
    create_dir(&args.output)?;
    for (s, img) in &images {
        write_rgb_png(img, args.output.join(format!("{s}.png"))).map_err(input_err)?;
    }
    if args.montage {
        let all: Vec<RgbImage> = images.into_iter().map(|(_, i)| i).collect();
        if all.windows(2).any(|w| w[0].height != w[1].height) {
            return Err(CliError::Input("frames differ in height; cannot build a montage".into()));
        }
        write_rgb_png(&RgbImage::montage(&all), args.output.join("montage.png")).map_err(input_err)?;
    }
    Ok(())
}

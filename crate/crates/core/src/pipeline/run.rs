use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{abo, localization_accuracy, mabo, matched_overlaps, standard_ablation, EvalReport};
use crate::foreground::{aggregate_cues, gradient_magnitude, initial_proposal_score, motion_magnitude, smooth_mrf, ScoreVolume};
use crate::gmcp::{
    length_penalty, solve, solve_multi_instance, ComponentMask, GmcpGraph, GmcpNode, MultiInstanceOptions, Selection,
    SolverOptions,
};
use crate::model::{ActionProposal, GroundTruthTube, Tube};
use crate::similarity::{Calibration, ClassSimilarities};
use crate::subset::select_subset;

use super::config::{InstanceBudgets, PipelineConfig};
use super::format::{box_records, to_jsonl, tube_from_records, write_atomic, AnnotationRecord};
use super::ingest::{ClassView, Dataset, Video};

/// Foreground map of a video: motion and saliency cues smoothed by the MRF.
/// Saliency falls back to the intensity gradient, then to motion alone.
pub fn foreground_volume(video: &Video, cfg: &PipelineConfig) -> Result<ScoreVolume> {
    let m = video.meta.frames as usize;
    let motion = motion_magnitude(&video.flow).padded_to(m);
    let saliency = match (&video.saliency, &video.intensity) {
        (Some(s), _) => s.clone(),
        (None, Some(i)) => gradient_magnitude(i),
        (None, None) => ScoreVolume::zeros(m, motion.height(), motion.width())?,
    };
    smooth_mrf(&aggregate_cues(&motion, &saliency)?, &cfg.mrf)
}

/// A video's proposals with initial scores, and the kept pool.
#[derive(Debug, Clone)]
pub struct ScoredVideo<'a> {
    pub video: &'a Video,
    pub proposals: Vec<ActionProposal>,
    pub exemplars: usize,
    /// Indices into `proposals`, in subset rank order.
    pub pool: Vec<usize>,
}

fn score_video<'a>(video: &'a Video, cfg: &PipelineConfig) -> Result<ScoredVideo<'a>> {
    if video.proposals.is_empty() {
        return Err(Error::EmptyInput("proposals"));
    }
    let volume = foreground_volume(video, cfg)?;
    let mut proposals = video.proposals.clone();
    for p in &mut proposals {
        p.initial_score = initial_proposal_score(p, &volume)?;
    }
    let subset = select_subset(&proposals, &cfg.subset)?;
    let index: BTreeMap<u32, usize> = proposals.iter().enumerate().map(|(k, p)| (p.id, k)).collect();
    let pool = subset.ranked(&proposals, cfg.top_k).iter().map(|id| index[id]).collect();
    Ok(ScoredVideo {
        video,
        proposals,
        exemplars: subset.exemplars.len(),
        pool,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoFailure {
    pub video_id: String,
    pub message: String,
}

/// Everything about a class that does not depend on the component mask.
#[derive(Debug, Clone)]
pub struct ClassContext<'a> {
    pub label: String,
    pub videos: Vec<ScoredVideo<'a>>,
    pub similarities: ClassSimilarities,
    pub failures: Vec<VideoFailure>,
}

/// Scores and thins every video of the class, then computes cross-video
/// similarities. Videos that fail are dropped and recorded.
pub fn prepare_class<'a>(view: &ClassView<'a>, cfg: &PipelineConfig) -> Result<ClassContext<'a>> {
    let mut failures: Vec<VideoFailure> = view
        .failures
        .iter()
        .map(|f| VideoFailure {
            video_id: f.video_id.clone(),
            message: f.message.clone(),
        })
        .collect();
    let mut videos = Vec::new();
    for v in &view.videos {
        match score_video(v, cfg) {
            Ok(s) => videos.push(s),
            Err(e) => {
                log::warn!("class {}: video {}: {e}", view.label, v.meta.video_id);
                failures.push(VideoFailure {
                    video_id: v.meta.video_id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    if videos.is_empty() {
        return Err(Error::EmptyInput("usable videos"));
    }
    let groups: Vec<Vec<&ActionProposal>> = videos
        .iter()
        .map(|s| s.pool.iter().map(|&k| &s.proposals[k]).collect())
        .collect();
    let similarities = ClassSimilarities::compute(&groups, &cfg.similarity, cfg.seed)?;
    Ok(ClassContext {
        label: view.label.clone(),
        videos,
        similarities,
        failures,
    })
}

fn label_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a, so a class's solver seed does not depend on its position.
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in label.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortfallRecord {
    pub video_id: String,
    pub requested: usize,
    pub found: usize,
}

#[derive(Debug, Clone)]
pub struct ClassSolution {
    /// Ordered by video (manifest order), then instance.
    pub annotations: Vec<AnnotationRecord>,
    pub rounds: Vec<Selection>,
    pub shortfalls: Vec<ShortfallRecord>,
}

/// Builds the selection graph under `mask` and solves it.
pub fn solve_class(ctx: &ClassContext, cfg: &PipelineConfig, mask: ComponentMask) -> Result<ClassSolution> {
    let groups: Vec<Vec<GmcpNode>> = ctx
        .videos
        .iter()
        .map(|s| {
            let m = s.video.meta.frames as usize;
            s.pool
                .iter()
                .map(|&k| {
                    let p = &s.proposals[k];
                    Ok(GmcpNode::new(p.id, p.initial_score, length_penalty(m, p.tube.len())?).with_tube(p.tube.clone()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let graph = GmcpGraph::from_similarities(groups, cfg.solver.alpha, &ctx.similarities, mask)?;
    let solver = SolverOptions {
        max_iterations: cfg.solver.max_iterations,
        init: cfg.solver.init,
        restarts: cfg.solver.restarts,
        seed: label_seed(cfg.seed, &ctx.label),
    };
    let budgets: Vec<usize> = ctx
        .videos
        .iter()
        .map(|s| match cfg.instance_budgets {
            InstanceBudgets::Manifest => s.video.meta.instance_count as usize,
            InstanceBudgets::One => 1,
        })
        .collect();

    let (rounds, shortfalls) = if budgets.iter().all(|&b| b == 1) {
        (vec![solve(&graph, &solver)], Vec::new())
    } else {
        let opts = MultiInstanceOptions {
            overlap_threshold: cfg.multi_instance.overlap_threshold,
            exhausted: cfg.multi_instance.exhausted,
            solver,
        };
        let res = solve_multi_instance(&graph, &budgets, &opts)?;
        let shortfalls = res
            .shortfalls
            .iter()
            .map(|s| ShortfallRecord {
                video_id: ctx.videos[s.group].video.meta.video_id.clone(),
                requested: s.requested,
                found: s.found,
            })
            .collect();
        (res.rounds, shortfalls)
    };

    let mut per_video: Vec<Vec<AnnotationRecord>> = vec![Vec::new(); ctx.videos.len()];
    for (r, sel) in rounds.iter().enumerate() {
        let n = sel.chosen.len();
        for (&g, &a) in &sel.chosen {
            if sel.pinned.contains(&g) {
                continue;
            }
            let node = &graph.groups()[g][a];
            let edges: f64 = sel.chosen.iter().filter(|(&h, _)| h != g).map(|(&h, &b)| graph.edge(g, a, h, b)).sum();
            let video = ctx.videos[g].video;
            let tube = node.tube.as_ref().expect("pipeline nodes carry tubes");
            let instance_id = per_video[g].len() as u32;
            per_video[g].push(AnnotationRecord {
                video_id: video.meta.video_id.clone(),
                class_label: ctx.label.clone(),
                instance_id,
                proposal_id: node.proposal_id,
                boxes: box_records(tube),
                objective_contribution: (n.saturating_sub(1)) as f64 * graph.alpha() * node.omega + edges,
                omega: node.omega,
                eta: node.eta,
                round: r,
                degenerate: sel.degenerate,
            });
        }
    }
    Ok(ClassSolution {
        annotations: per_video.into_iter().flatten().collect(),
        rounds,
        shortfalls,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassStatus {
    Ok,
    /// Annotated, but some videos failed or fell short of their budget.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub status: ClassStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub videos: usize,
    pub annotated_videos: usize,
    pub failures: Vec<VideoFailure>,
    pub shortfalls: Vec<ShortfallRecord>,
    /// Objective of each selection round.
    pub objective: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: bool,
    pub degenerate: bool,
    /// Exemplars kept by subset selection, per video.
    pub exemplars: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    /// ABO of the pools handed to the solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kept_pool_abo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localization_accuracy: Option<f64>,
}

impl ClassReport {
    fn failed(videos: usize, failures: Vec<VideoFailure>, error: String) -> Self {
        Self {
            status: ClassStatus::Failed,
            error: Some(error),
            videos,
            annotated_videos: 0,
            failures,
            shortfalls: Vec::new(),
            objective: Vec::new(),
            iterations: Vec::new(),
            converged: false,
            degenerate: false,
            exemplars: BTreeMap::new(),
            calibration: None,
            kept_pool_abo: None,
            localization_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub mask: ComponentMask,
    pub classes: BTreeMap<String, ClassReport>,
    /// Present when the dataset has ground truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Class label -> annotations.
    pub annotations: BTreeMap<String, Vec<AnnotationRecord>>,
    pub report: RunReport,
}

impl RunOutcome {
    /// 0 when every class is fully annotated, 1 when nothing was annotated,
    /// 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        let statuses: Vec<ClassStatus> = self.report.classes.values().map(|c| c.status).collect();
        if statuses.iter().all(|&s| s == ClassStatus::Failed) {
            1
        } else if statuses.iter().all(|&s| s == ClassStatus::Ok) {
            0
        } else {
            2
        }
    }
}

fn class_ground_truth<'a>(videos: impl IntoIterator<Item = &'a Video>) -> Vec<GroundTruthTube> {
    videos.into_iter().flat_map(|v| v.ground_truth.iter().cloned()).collect()
}

fn report_for(ctx: &ClassContext, sol: &ClassSolution, threshold: f64, total_videos: usize) -> Result<ClassReport> {
    let gts = class_ground_truth(ctx.videos.iter().map(|s| s.video));
    let pools: BTreeMap<String, Vec<Tube>> = ctx
        .videos
        .iter()
        .map(|s| {
            let tubes = s.pool.iter().map(|&k| s.proposals[k].tube.clone()).collect();
            (s.video.meta.video_id.clone(), tubes)
        })
        .collect();
    let selections = selection_tubes(&sol.annotations, &ctx.videos.iter().map(|s| s.video).collect::<Vec<_>>())?;
    let annotated: BTreeSet<&str> = sol.annotations.iter().map(|a| a.video_id.as_str()).collect();
    let status = if ctx.failures.is_empty() && sol.shortfalls.is_empty() {
        ClassStatus::Ok
    } else {
        ClassStatus::Partial
    };
    Ok(ClassReport {
        status,
        error: None,
        videos: total_videos,
        annotated_videos: annotated.len(),
        failures: ctx.failures.clone(),
        shortfalls: sol.shortfalls.clone(),
        objective: sol.rounds.iter().map(|r| r.objective).collect(),
        iterations: sol.rounds.iter().map(|r| r.iterations).collect(),
        converged: sol.rounds.iter().all(|r| r.converged),
        degenerate: sol.rounds.iter().any(|r| r.degenerate),
        exemplars: ctx.videos.iter().map(|s| (s.video.meta.video_id.clone(), s.exemplars)).collect(),
        calibration: Some(ctx.similarities.calibration),
        kept_pool_abo: if gts.is_empty() { None } else { Some(abo(&pools, &gts)?) },
        localization_accuracy: (!gts.is_empty()).then(|| localization_accuracy(&selections, &gts, threshold)),
    })
}

/// Annotation tubes per video, rebuilt from their box records.
fn selection_tubes(annotations: &[AnnotationRecord], videos: &[&Video]) -> Result<BTreeMap<String, Vec<Tube>>> {
    let meta: BTreeMap<&str, &Video> = videos.iter().map(|v| (v.meta.video_id.as_str(), *v)).collect();
    let mut out: BTreeMap<String, Vec<Tube>> = BTreeMap::new();
    for a in annotations {
        let Some(v) = meta.get(a.video_id.as_str()) else {
            continue;
        };
        let tube = tube_from_records(&a.boxes, v.meta.frames, v.meta.width, v.meta.height)?;
        out.entry(a.video_id.clone()).or_default().push(tube);
    }
    Ok(out)
}

/// Scores annotations against the dataset's ground truth. Pool ABO is taken
/// over each video's full ingested proposal pool.
pub fn evaluate(dataset: &Dataset, annotations: &[AnnotationRecord], threshold: f64) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    let mut all_gts = Vec::new();
    let mut abos = Vec::new();
    let all_videos: Vec<&Video> = dataset.videos.iter().collect();
    let selections = selection_tubes(annotations, &all_videos)?;
    for class in dataset.classes() {
        let gts = class_ground_truth(class.videos.iter().copied());
        if gts.is_empty() {
            continue;
        }
        let pools: BTreeMap<String, Vec<Tube>> = class
            .videos
            .iter()
            .map(|v| (v.meta.video_id.clone(), v.proposals.iter().map(|p| p.tube.clone()).collect()))
            .collect();
        let a = abo(&pools, &gts)?;
        abos.push(a);
        report.per_class_abo.insert(class.label.clone(), a);
        report
            .per_class_accuracy
            .insert(class.label.clone(), localization_accuracy(&selections, &gts, threshold));
        all_gts.extend(gts);
    }
    if all_gts.is_empty() {
        return Err(Error::EmptyInput("ground truth"));
    }
    report.mabo = mabo(&abos)?;
    report.localization_accuracy = localization_accuracy(&selections, &all_gts, threshold);
    let matched = matched_overlaps(&selections, &all_gts);
    for (g, o) in all_gts.iter().zip(matched) {
        let best = report.per_video_best_iou.entry(g.video_id.clone()).or_insert(0.0);
        *best = best.max(o);
    }
    Ok(report)
}

fn run_classes(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    masks: &[ComponentMask],
) -> Result<Vec<(BTreeMap<String, Vec<AnnotationRecord>>, BTreeMap<String, ClassReport>)>> {
    cfg.validate()?;
    let mut out: Vec<_> = masks.iter().map(|_| (BTreeMap::new(), BTreeMap::new())).collect();
    for class in dataset.classes() {
        let total = class.videos.len() + class.failures.len();
        let ctx = match prepare_class(&class, cfg) {
            Ok(c) => c,
            Err(e) => {
                log::error!("class {}: {e}", class.label);
                let failures = class
                    .failures
                    .iter()
                    .map(|f| VideoFailure {
                        video_id: f.video_id.clone(),
                        message: f.message.clone(),
                    })
                    .collect::<Vec<_>>();
                for (_, reports) in out.iter_mut() {
                    reports.insert(class.label.clone(), ClassReport::failed(total, failures.clone(), e.to_string()));
                }
                continue;
            }
        };
        for (mask, (annotations, reports)) in masks.iter().zip(out.iter_mut()) {
            let result = solve_class(&ctx, cfg, *mask)
                .and_then(|sol| Ok((report_for(&ctx, &sol, cfg.eval_threshold, total)?, sol)));
            match result {
                Ok((report, sol)) => {
                    log::info!(
                        "class {}: {} annotations, objective {:?}",
                        class.label,
                        sol.annotations.len(),
                        report.objective
                    );
                    annotations.insert(class.label.clone(), sol.annotations);
                    reports.insert(class.label.clone(), report);
                }
                Err(e) => {
                    log::error!("class {}: {e}", class.label);
                    reports.insert(class.label.clone(), ClassReport::failed(total, ctx.failures.clone(), e.to_string()));
                }
            }
        }
    }
    Ok(out)
}

fn finish(
    dataset: &Dataset,
    cfg: &PipelineConfig,
    mask: ComponentMask,
    annotations: BTreeMap<String, Vec<AnnotationRecord>>,
    classes: BTreeMap<String, ClassReport>,
) -> RunOutcome {
    let flat: Vec<AnnotationRecord> = annotations.values().flatten().cloned().collect();
    let eval = evaluate(dataset, &flat, cfg.eval_threshold).ok();
    RunOutcome {
        annotations,
        report: RunReport {
            seed: cfg.seed,
            mask,
            classes,
            eval,
        },
    }
}

/// Annotates every class with all similarity components. A class that fails
/// is reported and does not affect the others.
pub fn run(dataset: &Dataset, cfg: &PipelineConfig) -> Result<RunOutcome> {
    run_with_mask(dataset, cfg, ComponentMask::ALL)
}

pub fn run_with_mask(dataset: &Dataset, cfg: &PipelineConfig, mask: ComponentMask) -> Result<RunOutcome> {
    let (annotations, classes) = run_classes(dataset, cfg, &[mask])?.pop().expect("one mask");
    Ok(finish(dataset, cfg, mask, annotations, classes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub mask: ComponentMask,
    pub localization_accuracy: f64,
    pub per_class_accuracy: BTreeMap<String, f64>,
}

/// Runs the standard component ablation. Scoring and similarities are
/// computed once per class and shared by every column.
pub fn ablate(dataset: &Dataset, cfg: &PipelineConfig) -> Result<Vec<AblationRow>> {
    let configs = standard_ablation();
    let masks: Vec<ComponentMask> = configs.iter().map(|c| c.mask).collect();
    let results = run_classes(dataset, cfg, &masks)?;
    configs
        .into_iter()
        .zip(results)
        .map(|(c, (annotations, _))| {
            let flat: Vec<AnnotationRecord> = annotations.into_values().flatten().collect();
            let eval = evaluate(dataset, &flat, cfg.eval_threshold)?;
            Ok(AblationRow {
                name: c.name,
                mask: c.mask,
                localization_accuracy: eval.localization_accuracy,
                per_class_accuracy: eval.per_class_accuracy,
            })
        })
        .collect()
}

/// File name for a class label: characters outside `[A-Za-z0-9._-]` become `_`.
pub fn class_file_name(label: &str) -> String {
    let stem: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{stem}.jsonl")
}

/// Writes `annotations/<class>.jsonl` and `report.json` under `dir`, each
/// atomically. Returns the report path.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<PathBuf> {
    let adir = dir.join("annotations");
    for (label, records) in &outcome.annotations {
        write_atomic(&adir.join(class_file_name(label)), &to_jsonl(records)?)?;
    }
    let path = dir.join("report.json");
    let mut bytes = serde_json::to_vec_pretty(&outcome.report).map_err(|e| Error::format(&path, e))?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

/// Reads every `*.jsonl` file in an annotations directory, in file name order.
pub fn read_annotations(dir: &Path) -> Result<Vec<AnnotationRecord>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(super::format::read_jsonl::<AnnotationRecord>(&f)?.into_iter().map(|(_, r)| r));
    }
    Ok(out)
}

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::foreground::{FlowField, ScoreVolume};
use crate::model::{ActionProposal, GroundTruthTube, VideoMeta};

use super::format::{
    box_records, read_jsonl, read_raster, tube_from_records, to_jsonl, write_atomic, write_raster,
    GroundTruthRecord, ManifestRecord, ProposalRecord, Raster,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub meta: VideoMeta,
    pub proposals: Vec<ActionProposal>,
    pub flow: FlowField,
    pub saliency: Option<ScoreVolume>,
    pub intensity: Option<ScoreVolume>,
    pub ground_truth: Vec<GroundTruthTube>,
}

/// A video that could not be loaded; only its class is affected.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestFailure {
    pub video_id: String,
    pub class_label: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    /// Manifest order.
    pub videos: Vec<Video>,
    pub failures: Vec<IngestFailure>,
}

/// Videos of one class in manifest order.
#[derive(Debug, Clone)]
pub struct ClassView<'a> {
    pub label: String,
    pub videos: Vec<&'a Video>,
    pub failures: Vec<&'a IngestFailure>,
}

impl Dataset {
    /// Classes in order of first appearance in the manifest.
    pub fn classes(&self) -> Vec<ClassView<'_>> {
        let mut order: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        let labels = self
            .videos
            .iter()
            .map(|v| &v.meta.class_label)
            .chain(self.failures.iter().map(|f| &f.class_label));
        for l in labels {
            if seen.insert(l.clone()) {
                order.push(l.clone());
            }
        }
        order
            .into_iter()
            .map(|label| ClassView {
                videos: self.videos.iter().filter(|v| v.meta.class_label == label).collect(),
                failures: self.failures.iter().filter(|f| f.class_label == label).collect(),
                label,
            })
            .collect()
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn single_channel(raster: Raster, meta: &VideoMeta, path: &Path, what: &str) -> Result<ScoreVolume> {
    if raster.channels != 1 {
        return Err(Error::format(path, format!("{what} raster must have 1 channel, found {}", raster.channels)));
    }
    if raster.frames != meta.frames as usize || raster.height != meta.height as usize || raster.width != meta.width as usize {
        return Err(Error::format(
            path,
            format!(
                "{what} raster is {}x{}x{}, video is {}x{}x{}",
                raster.frames, raster.height, raster.width, meta.frames, meta.height, meta.width
            ),
        ));
    }
    ScoreVolume::new(raster.frames, raster.height, raster.width, raster.channel(0)).map_err(|e| Error::format(path, e))
}

fn load_video(base: &Path, rec: &ManifestRecord) -> Result<Video> {
    let meta = VideoMeta {
        video_id: rec.video_id.clone(),
        frames: rec.frames,
        height: rec.height,
        width: rec.width,
        class_label: rec.class_label.clone(),
        instance_count: rec.instance_count,
    };
    meta.validate()?;

    let path = resolve(base, &rec.proposals);
    let mut proposals = Vec::new();
    let mut ids = BTreeSet::new();
    for (line, r) in read_jsonl::<ProposalRecord>(&path)? {
        if r.video_id != meta.video_id {
            return Err(Error::record(&path, line, format!("proposal belongs to video {:?}", r.video_id)));
        }
        if !ids.insert(r.id) {
            return Err(Error::record(&path, line, format!("duplicate proposal id {}", r.id)));
        }
        let p = r
            .into_proposal(meta.frames, meta.width, meta.height)
            .map_err(|e| Error::record(&path, line, e))?;
        proposals.push(p);
    }

    let path = resolve(base, &rec.flow);
    let raster = read_raster(&path)?;
    if raster.channels != 2 {
        return Err(Error::format(&path, format!("flow raster must have 2 channels, found {}", raster.channels)));
    }
    let m = meta.frames as usize;
    if raster.height != meta.height as usize || raster.width != meta.width as usize || !(raster.frames == m || raster.frames + 1 == m) {
        return Err(Error::format(
            &path,
            format!(
                "flow raster is {}x{}x{}, video is {m}x{}x{}",
                raster.frames, raster.height, raster.width, meta.height, meta.width
            ),
        ));
    }
    let flow = FlowField::new(raster.frames, raster.height, raster.width, raster.channel(0), raster.channel(1))
        .map_err(|e| Error::format(&path, e))?;

    let saliency = match &rec.saliency {
        Some(p) => {
            let path = resolve(base, p);
            Some(single_channel(read_raster(&path)?, &meta, &path, "saliency")?)
        }
        None => None,
    };
    let intensity = match &rec.intensity {
        Some(p) => {
            let path = resolve(base, p);
            Some(single_channel(read_raster(&path)?, &meta, &path, "intensity")?)
        }
        None => None,
    };

    let mut ground_truth = Vec::new();
    if let Some(p) = &rec.ground_truth {
        let path = resolve(base, p);
        for (line, r) in read_jsonl::<GroundTruthRecord>(&path)? {
            if r.video_id != meta.video_id {
                return Err(Error::record(&path, line, format!("ground truth belongs to video {:?}", r.video_id)));
            }
            let tube = tube_from_records(&r.boxes, meta.frames, meta.width, meta.height)
                .map_err(|e| Error::record(&path, line, e))?;
            ground_truth.push(GroundTruthTube {
                video_id: r.video_id,
                instance_id: r.instance_id,
                tube,
            });
        }
    }

    Ok(Video {
        meta,
        proposals,
        flow,
        saliency,
        intensity,
        ground_truth,
    })
}

/// Loads a manifest. Malformed manifest lines and duplicate video ids are
/// fatal; a video whose own files are missing or invalid is recorded as a
/// failure and the rest of the dataset still loads.
pub fn ingest(manifest: &Path) -> Result<Dataset> {
    let base = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let records = read_jsonl::<ManifestRecord>(manifest)?;
    let mut seen = BTreeMap::new();
    for (line, r) in &records {
        if let Some(prev) = seen.insert(r.video_id.clone(), *line) {
            return Err(Error::record(manifest, *line, format!("video {:?} already declared on line {prev}", r.video_id)));
        }
    }
    if records.is_empty() {
        log::warn!("{}: manifest lists no videos", manifest.display());
    }
    let mut ds = Dataset::default();
    for (line, rec) in &records {
        match load_video(&base, rec) {
            Ok(v) => ds.videos.push(v),
            Err(e) => {
                log::warn!("{}:{line}: video {}: {e}", manifest.display(), rec.video_id);
                ds.failures.push(IngestFailure {
                    video_id: rec.video_id.clone(),
                    class_label: rec.class_label.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(ds)
}

/// Like [`ingest`] but any per-video failure is an error.
pub fn ingest_strict(manifest: &Path) -> Result<Dataset> {
    let ds = ingest(manifest)?;
    if let Some(f) = ds.failures.first() {
        return Err(Error::Config(format!("video {}: {}", f.video_id, f.message)));
    }
    Ok(ds)
}

/// Writes the dataset under `dir` (one sub-directory per video) and returns
/// the manifest path.
pub fn export(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    let mut manifest = Vec::new();
    for v in &ds.videos {
        let id = &v.meta.video_id;
        let vdir = dir.join(id);
        let rel = |name: &str| PathBuf::from(id).join(name);

        let props: Vec<ProposalRecord> = v.proposals.iter().map(ProposalRecord::from_proposal).collect();
        write_atomic(&vdir.join("proposals.jsonl"), &to_jsonl(&props)?)?;

        let f = &v.flow;
        write_raster(&vdir.join("flow.tsrv"), &Raster::from_planes(f.frames(), f.height(), f.width(), &[f.u(), f.v()])?)?;

        let mut rec = ManifestRecord {
            video_id: id.clone(),
            class_label: v.meta.class_label.clone(),
            frames: v.meta.frames,
            height: v.meta.height,
            width: v.meta.width,
            instance_count: v.meta.instance_count,
            proposals: rel("proposals.jsonl"),
            flow: rel("flow.tsrv"),
            saliency: None,
            intensity: None,
            ground_truth: None,
        };
        for (vol, name, slot) in [
            (&v.saliency, "saliency.tsrv", &mut rec.saliency),
            (&v.intensity, "intensity.tsrv", &mut rec.intensity),
        ] {
            if let Some(s) = vol {
                write_raster(&vdir.join(name), &Raster::from_planes(s.frames(), s.height(), s.width(), &[s.values()])?)?;
                *slot = Some(rel(name));
            }
        }
        if !v.ground_truth.is_empty() {
            let gts: Vec<GroundTruthRecord> = v
                .ground_truth
                .iter()
                .map(|g| GroundTruthRecord {
                    video_id: g.video_id.clone(),
                    instance_id: g.instance_id,
                    boxes: box_records(&g.tube),
                })
                .collect();
            write_atomic(&vdir.join("ground_truth.jsonl"), &to_jsonl(&gts)?)?;
            rec.ground_truth = Some(rel("ground_truth.jsonl"));
        }
        manifest.push(rec);
    }
    let path = dir.join("manifest.jsonl");
    write_atomic(&path, &to_jsonl(&manifest)?)?;
    Ok(path)
}

//! Embedding data model, frame pooling and the JSON Lines embedding archive.
//!
//! Every video is represented by a single vector: the component-wise mean of
//! its sampled frame embeddings. Archives hold one record per line with the
//! fields `video_id`, `concept`, `dim`, `n_frames`, `vector`, `source_path`.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on schedule length; anything larger is almost certainly a unit mistake.
const MAX_SCHEDULE_LEN: usize = 10_000_000;

/// Raw frame embeddings of one video together with their sample times (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    video_id: String,
    timestamps: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

impl FrameSequence {
    pub fn new(
        video_id: impl Into<String>,
        timestamps: Vec<f64>,
        frames: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if frames.is_empty() {
            return Err(Error::EmptySet(format!("video `{video_id}` has no frames")));
        }
        if timestamps.len() != frames.len() {
            return Err(Error::invalid(format!(
                "video `{video_id}`: {} timestamps for {} frames",
                timestamps.len(),
                frames.len()
            )));
        }
        let dim = frames[0].len();
        if dim == 0 {
            return Err(Error::invalid(format!(
                "video `{video_id}`: frame dimension must be at least 1"
            )));
        }
        for frame in &frames {
            if frame.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: frame.len(),
                });
            }
            if frame.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "video `{video_id}`: non-finite frame value"
                )));
            }
        }
        for (i, &t) in timestamps.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::invalid(format!(
                    "video `{video_id}`: timestamp {t} is not a non-negative number"
                )));
            }
            if i > 0 && t <= timestamps[i - 1] {
                return Err(Error::invalid(format!(
                    "video `{video_id}`: timestamps must be strictly increasing"
                )));
            }
        }
        Ok(Self {
            video_id,
            timestamps,
            frames,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn dim(&self) -> usize {
        self.frames[0].len()
    }
}

/// How frame vectors are combined into a video vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolMode {
    /// Arithmetic mean of the raw frame vectors.
    #[default]
    Mean,
    /// Each frame is L2-normalized before averaging.
    MeanOfNormalized,
}

/// A pooled per-video embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoEmbedding {
    pub video_id: String,
    pub concept: String,
    pub dim: usize,
    pub n_frames: usize,
    pub vector: Vec<f64>,
    #[serde(default)]
    pub source_path: Option<String>,
}

impl VideoEmbedding {
    pub fn new(
        video_id: impl Into<String>,
        concept: impl Into<String>,
        vector: Vec<f64>,
        n_frames: usize,
    ) -> Result<Self> {
        let emb = Self {
            video_id: video_id.into(),
            concept: concept.into(),
            dim: vector.len(),
            n_frames,
            vector,
            source_path: None,
        };
        emb.validate()?;
        Ok(emb)
    }

    pub fn with_source_path(mut self, path: impl Into<String>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    /// Checks the record-level invariants (zero vectors are checked by [`ConceptSet`]).
    pub fn validate(&self) -> Result<()> {
        if self.video_id.is_empty() {
            return Err(Error::invalid("video_id must not be empty"));
        }
        if self.concept.is_empty() {
            return Err(Error::invalid(format!(
                "video `{}`: concept must not be empty",
                self.video_id
            )));
        }
        if self.dim == 0 {
            return Err(Error::invalid(format!(
                "video `{}`: dim must be positive",
                self.video_id
            )));
        }
        if self.vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "video `{}`: dim is {} but vector has {} entries",
                self.video_id,
                self.dim,
                self.vector.len()
            )));
        }
        if self.n_frames == 0 {
            return Err(Error::invalid(format!(
                "video `{}`: n_frames must be positive",
                self.video_id
            )));
        }
        if self.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "video `{}`: vector contains a non-finite value",
                self.video_id
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.vector.iter().all(|&v| v == 0.0)
    }
}

/// Mean-pools a frame sequence into one video embedding.
///
/// No normalization is applied to the result; with [`PoolMode::MeanOfNormalized`]
/// the individual frames are normalized first.
pub fn pool_frames(seq: &FrameSequence, concept: &str, mode: PoolMode) -> Result<VideoEmbedding> {
    let dim = seq.dim();
    let mut sum = vec![0.0; dim];
    for frame in &seq.frames {
        if frame.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: frame.len(),
            });
        }
        match mode {
            PoolMode::Mean => {
                for (acc, v) in sum.iter_mut().zip(frame) {
                    *acc += v;
                }
            }
            PoolMode::MeanOfNormalized => {
                let norm = frame.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::ZeroVector(Some(format!(
                        "frame of video `{}`",
                        seq.video_id
                    ))));
                }
                for (acc, v) in sum.iter_mut().zip(frame) {
                    *acc += v / norm;
                }
            }
        }
    }
    let n = seq.frames.len();
    let vector: Vec<f64> = sum.into_iter().map(|s| s / n as f64).collect();
    if vector.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVector(Some(seq.video_id.clone())));
    }
    VideoEmbedding::new(seq.video_id.clone(), concept, vector, n)
}

/// Sample times `k * interval` for `k = 0, 1, ...` strictly below `duration`.
///
/// A sample landing within `1e-9 * interval` of `duration` counts as equal to it
/// and is excluded, so that `k * interval` rounding never adds a spurious frame.
pub fn sampling_schedule(duration: f64, interval: f64) -> Result<Vec<f64>> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if !(interval.is_finite() && interval > 0.0) {
        return Err(Error::invalid(format!(
            "interval must be positive, got {interval}"
        )));
    }
    let limit = duration - interval * 1e-9;
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * interval;
        if t >= limit {
            break;
        }
        if out.len() >= MAX_SCHEDULE_LEN {
            return Err(Error::invalid(format!(
                "schedule for duration {duration} at interval {interval} exceeds {MAX_SCHEDULE_LEN} samples"
            )));
        }
        out.push(t);
        k += 1;
    }
    Ok(out)
}

/// Whether a concept set plays the target (X, Y) or attribute (A, B) role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Attribute,
}

/// A named collection of same-dimension embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptSet {
    name: String,
    role: Role,
    members: Vec<VideoEmbedding>,
}

impl ConceptSet {
    pub fn new(name: impl Into<String>, role: Role, members: Vec<VideoEmbedding>) -> Result<Self> {
        let name = name.into();
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "concept set `{name}` needs at least 2 members, has {}",
                members.len()
            )));
        }
        let dim = members[0].dim;
        let mut seen = HashSet::with_capacity(members.len());
        for m in &members {
            m.validate()?;
            if m.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim,
                });
            }
            if m.is_zero() {
                return Err(Error::ZeroVector(Some(m.video_id.clone())));
            }
            if !seen.insert(m.video_id.as_str()) {
                return Err(Error::Duplicate {
                    kind: "video_id in concept set",
                    key: format!("{name}/{}", m.video_id),
                });
            }
        }
        Ok(Self {
            name,
            role,
            members,
        })
    }

    /// Builds a set from bare vectors, naming members `{name}-{index}`.
    pub fn from_vectors(name: &str, role: Role, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let members = vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| VideoEmbedding::new(format!("{name}-{i}"), name, v, 1))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, role, members)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn members(&self) -> &[VideoEmbedding] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }
}

/// Groups embeddings by concept label, keeping archive order within each group.
pub fn group_by_concept(embeddings: Vec<VideoEmbedding>) -> BTreeMap<String, Vec<VideoEmbedding>> {
    let mut groups: BTreeMap<String, Vec<VideoEmbedding>> = BTreeMap::new();
    for e in embeddings {
        groups.entry(e.concept.clone()).or_default().push(e);
    }
    groups
}

/// Reads a JSON Lines embedding archive. Blank lines are ignored.
pub fn read_archive(path: impl AsRef<Path>) -> Result<Vec<VideoEmbedding>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut keys: HashSet<(String, String)> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let record: VideoEmbedding =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        record.validate().map_err(|e| parse_err(e.to_string()))?;
        if !keys.insert((record.video_id.clone(), record.concept.clone())) {
            return Err(parse_err(format!(
                "duplicate (video_id, concept) pair ({}, {})",
                record.video_id, record.concept
            )));
        }
        out.push(record);
    }
    Ok(out)
}

/// Writes embeddings as JSON Lines. Floats use shortest round-trip formatting,
/// so reading the file back reproduces every value bit for bit.
pub fn write_archive(embeddings: &[VideoEmbedding], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if embeddings.is_empty() {
        return Err(Error::EmptySet(
            "archive must contain at least one record".into(),
        ));
    }
    let mut dims: BTreeMap<&str, usize> = BTreeMap::new();
    let mut keys: HashSet<(&str, &str)> = HashSet::new();
    for e in embeddings {
        e.validate()?;
        let dim = *dims.entry(e.concept.as_str()).or_insert(e.dim);
        if dim != e.dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.dim,
            });
        }
        if !keys.insert((e.video_id.as_str(), e.concept.as_str())) {
            return Err(Error::Duplicate {
                kind: "(video_id, concept) pair",
                key: format!("({}, {})", e.video_id, e.concept),
            });
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in embeddings {
        let line = serde_json::to_string(e).map_err(|source| Error::Json {
            context: format!("serializing `{}`", e.video_id),
            source,
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Videos per concept the archive convention expects; other counts only warn.
pub const CONVENTIONAL_SET_SIZE: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchiveViolation {
    pub line: usize,
    pub message: String,
}

/// Full contract check of an archive: every violation, not just the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchiveReport {
    pub records: usize,
    pub concepts: BTreeMap<String, usize>,
    pub violations: Vec<ArchiveViolation>,
    pub warnings: Vec<String>,
}

impl ArchiveReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ArchiveReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            write!(
                f,
                "OK, {} records, {} concepts",
                self.records,
                self.concepts.len()
            )?;
        } else {
            write!(
                f,
                "{} violations in {} records",
                self.violations.len(),
                self.records
            )?;
            for v in &self.violations {
                write!(f, "\n  line {}: {}", v.line, v.message)?;
            }
        }
        for w in &self.warnings {
            write!(f, "\n  warning: {w}")?;
        }
        Ok(())
    }
}

/// Checks every line of an archive against the record contract.
/// Only I/O failures are errors; contract problems land in the report.
pub fn verify_archive(path: impl AsRef<Path>) -> Result<ArchiveReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut report = ArchiveReport {
        records: 0,
        concepts: BTreeMap::new(),
        violations: Vec::new(),
        warnings: Vec::new(),
    };
    let mut keys: HashSet<(String, String)> = HashSet::new();
    let mut dims: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut violation = |message: String| {
            report.violations.push(ArchiveViolation {
                line: line_no,
                message,
            })
        };
        let record: VideoEmbedding = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                violation(e.to_string());
                continue;
            }
        };
        if let Err(e) = record.validate() {
            violation(e.to_string());
            continue;
        }
        if record.is_zero() {
            violation(format!("video `{}`: zero vector", record.video_id));
        }
        if !keys.insert((record.video_id.clone(), record.concept.clone())) {
            violation(format!(
                "duplicate (video_id, concept) pair ({}, {})",
                record.video_id, record.concept
            ));
        }
        let (dim, first) = *dims
            .entry(record.concept.clone())
            .or_insert((record.dim, line_no));
        if dim != record.dim {
            violation(format!(
                "concept `{}`: dim {} differs from dim {dim} on line {first}",
                record.concept, record.dim
            ));
        }
        report.records += 1;
        *report.concepts.entry(record.concept).or_default() += 1;
    }
    for (concept, &n) in &report.concepts {
        if n != CONVENTIONAL_SET_SIZE {
            report.warnings.push(format!(
                "concept `{concept}` has {n} videos; sets conventionally hold {CONVENTIONAL_SET_SIZE}"
            ));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(frames: Vec<Vec<f64>>) -> FrameSequence {
        let ts = (0..frames.len()).map(|i| i as f64 * 0.25).collect();
        FrameSequence::new("v", ts, frames).unwrap()
    }

    #[test]
    fn pool_identical_frames() {
        let e = pool_frames(
            &seq(vec![vec![1.0, 0.0], vec![1.0, 0.0]]),
            "c",
            PoolMode::Mean,
        )
        .unwrap();
        assert_eq!(e.vector, vec![1.0, 0.0]);
        assert_eq!(e.n_frames, 2);
        assert_eq!(e.dim, 2);
    }

    #[test]
    fn pool_symmetric_mean() {
        let e = pool_frames(
            &seq(vec![vec![2.0, 0.0], vec![0.0, 2.0]]),
            "c",
            PoolMode::Mean,
        )
        .unwrap();
        assert_eq!(e.vector, vec![1.0, 1.0]);
    }

    #[test]
    fn pool_matches_resummation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let e = pool_frames(&seq(frames.clone()), "c", PoolMode::Mean).unwrap();
        for j in 0..4 {
            // independent order: reverse summation
            let mut s = 0.0;
            for f in frames.iter().rev() {
                s += f[j];
            }
            assert!((e.vector[j] - s / 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_normalized_frames() {
        let e = pool_frames(
            &seq(vec![vec![3.0, 0.0], vec![0.0, 0.5]]),
            "c",
            PoolMode::MeanOfNormalized,
        )
        .unwrap();
        assert_eq!(e.vector, vec![0.5, 0.5]);
    }

    #[test]
    fn pool_rejects_zero_result() {
        let err = pool_frames(
            &seq(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]),
            "c",
            PoolMode::Mean,
        );
        assert!(matches!(err, Err(Error::ZeroVector(_))));
    }

    #[test]
    fn frame_sequence_invariants() {
        assert!(FrameSequence::new("v", vec![], vec![]).is_err());
        assert!(FrameSequence::new("v", vec![0.0], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(matches!(
            FrameSequence::new("v", vec![0.0, 1.0], vec![vec![1.0], vec![2.0, 3.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(FrameSequence::new("v", vec![0.5, 0.5], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(FrameSequence::new("v", vec![-1.0], vec![vec![1.0]]).is_err());
        assert!(FrameSequence::new("v", vec![0.0], vec![vec![]]).is_err());
    }

    #[test]
    fn schedule_examples() {
        let s = sampling_schedule(5.0, 0.25).unwrap();
        assert_eq!(s.len(), 20);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[19], 4.75);
        assert_eq!(sampling_schedule(1.0, 1.0).unwrap(), vec![0.0]);
        assert_eq!(
            sampling_schedule(2.0, 0.5).unwrap(),
            vec![0.0, 0.5, 1.0, 1.5]
        );
        assert_eq!(sampling_schedule(0.7, 0.1).unwrap().len(), 7);
        assert_eq!(sampling_schedule(0.1, 0.25).unwrap(), vec![0.0]);
    }

    #[test]
    fn schedule_rejects_non_positive() {
        assert!(sampling_schedule(0.0, 0.25).is_err());
        assert!(sampling_schedule(5.0, 0.0).is_err());
        assert!(sampling_schedule(-1.0, 0.25).is_err());
        assert!(sampling_schedule(f64::NAN, 0.25).is_err());
    }

    #[test]
    fn concept_set_invariants() {
        let a = VideoEmbedding::new("a", "c", vec![1.0, 0.0], 1).unwrap();
        let b = VideoEmbedding::new("b", "c", vec![0.0, 1.0], 1).unwrap();
        assert!(ConceptSet::new("c", Role::Target, vec![a.clone()]).is_err());
        assert!(matches!(
            ConceptSet::new("c", Role::Target, vec![a.clone(), a.clone()]),
            Err(Error::Duplicate { .. })
        ));
        let z = VideoEmbedding::new("z", "c", vec![0.0, 0.0], 1).unwrap();
        assert!(matches!(
            ConceptSet::new("c", Role::Target, vec![a.clone(), z]),
            Err(Error::ZeroVector(_))
        ));
        let wide = VideoEmbedding::new("w", "c", vec![1.0, 0.0, 0.0], 1).unwrap();
        assert!(matches!(
            ConceptSet::new("c", Role::Target, vec![a.clone(), wide]),
            Err(Error::DimensionMismatch { .. })
        ));
        let set = ConceptSet::new("c", Role::Attribute, vec![a, b]).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.dim(), 2);
    }

    #[test]
    fn archive_round_trip_single() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let e = VideoEmbedding::new("v1", "flower", vec![0.1, 1.0 / 3.0, -2.5e-300], 20)
            .unwrap()
            .with_source_path("videos/v1.mp4");
        write_archive(std::slice::from_ref(&e), &path).unwrap();
        assert_eq!(read_archive(&path).unwrap(), vec![e]);
    }

    #[test]
    fn archive_reports_line_of_bad_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"video_id":"a","concept":"c","dim":2,"n_frames":1,"vector":[1,2],"source_path":null}"#,
                "\n",
                r#"{"video_id":"b","concept":"c","dim":3,"n_frames":1,"vector":[1,2],"source_path":null}"#,
                "\n"
            ),
        )
        .unwrap();
        match read_archive(&path) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("dim is 3"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn archive_rejects_missing_field_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            r#"{"video_id":"a","concept":"c","dim":1,"vector":[1]}"#,
        )
        .unwrap();
        match read_archive(&path) {
            Err(Error::Parse {
                line: 1, message, ..
            }) => assert!(message.contains("n_frames")),
            other => panic!("expected parse error, got {other:?}"),
        }

        let rec = r#"{"video_id":"a","concept":"c","dim":1,"n_frames":1,"vector":[1]}"#;
        std::fs::write(&path, format!("{rec}\n\n{rec}\n")).unwrap();
        assert!(matches!(
            read_archive(&path),
            Err(Error::Parse { line: 3, .. })
        ));

        let e = VideoEmbedding::new("a", "c", vec![1.0], 1).unwrap();
        assert!(write_archive(&[e.clone(), e], &path).is_err());
        assert!(write_archive(&[], &path).is_err());
    }

    #[test]
    fn archive_missing_file_is_io() {
        let err = read_archive("/nonexistent/archive.jsonl").unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/archive.jsonl"));
    }

    #[test]
    fn archive_groups_into_concept_sets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.jsonl");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let records: Vec<VideoEmbedding> = ["flower", "insect"]
            .iter()
            .flat_map(|c| (0..30).map(move |i| (c, i)))
            .map(|(c, i)| {
                let v = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                VideoEmbedding::new(format!("{c}-{i:02}"), *c, v, 20).unwrap()
            })
            .collect();
        assert_eq!(records.len(), 60);
        write_archive(&records, &path).unwrap();
        let groups = group_by_concept(read_archive(&path).unwrap());
        assert_eq!(groups.len(), 2);
        for (name, members) in groups {
            let set = ConceptSet::new(name, Role::Target, members).unwrap();
            assert_eq!(set.len(), 30);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn frames_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
            (1usize..6).prop_flat_map(|dim| {
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 1..12)
            })
        }

        proptest! {
            #[test]
            fn pooling_is_order_invariant(frames in frames_strategy(), seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                let mut shuffled = frames.clone();
                shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let a = pool_frames(&seq(frames), "c", PoolMode::Mean);
                let b = pool_frames(&seq(shuffled), "c", PoolMode::Mean);
                if let (Ok(a), Ok(b)) = (a, b) {
                    for (x, y) in a.vector.iter().zip(&b.vector) {
                        prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                    }
                }
            }

            #[test]
            fn pooling_is_linear(frames in frames_strategy(), c in 0.01f64..100.0) {
                let scaled: Vec<Vec<f64>> = frames.iter().map(|f| f.iter().map(|v| v * c).collect()).collect();
                if let (Ok(a), Ok(b)) = (pool_frames(&seq(frames), "c", PoolMode::Mean), pool_frames(&seq(scaled), "c", PoolMode::Mean)) {
                    for (x, y) in a.vector.iter().zip(&b.vector) {
                        prop_assert!((x * c - y).abs() <= 1e-9 * (1.0 + y.abs()));
                    }
                }
            }

            #[test]
            fn archive_round_trip(vectors in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 3), 1..8)) {
                let records: Vec<VideoEmbedding> = vectors
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| VideoEmbedding::new(format!("v{i}"), "c", v, 1 + i).unwrap())
                    .collect();
                let dir = tempfile::tempdir().unwrap();
                let path = dir.path().join("rt.jsonl");
                write_archive(&records, &path).unwrap();
                prop_assert_eq!(read_archive(&path).unwrap(), records);
            }
        }
    }

    #[test]
    fn verify_reports_every_violation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let good = |id: &str, c: &str| {
            format!(
            "{{\"video_id\":\"{id}\",\"concept\":\"{c}\",\"dim\":2,\"n_frames\":20,\"vector\":[1.0,0.5]}}"
        )
        };
        let lines = [
            good("v1", "c"),
            "{\"video_id\":\"v2\",\"concept\":\"c\",\"dim\":2,\"vector\":[1.0,0.5]}".to_string(),
            good("v1", "c"),
            "{\"video_id\":\"v3\",\"concept\":\"c\",\"dim\":3,\"n_frames\":1,\"vector\":[1.0,0.5,0.0]}".to_string(),
            "{\"video_id\":\"v4\",\"concept\":\"c\",\"dim\":2,\"n_frames\":1,\"vector\":[0.0,0.0]}".to_string(),
        ];
        std::fs::write(&path, lines.join("\n")).unwrap();
        let r = verify_archive(&path).unwrap();
        let at: Vec<usize> = r.violations.iter().map(|v| v.line).collect();
        assert_eq!(at, [2, 3, 4, 5]);
        assert!(r.violations[0].message.contains("n_frames"));
        assert!(!r.is_ok());
        assert!(r.to_string().contains("line 2"));

        let ok: Vec<VideoEmbedding> = (0..30)
            .map(|i| VideoEmbedding::new(format!("v{i}"), "c", vec![1.0, i as f64], 20).unwrap())
            .chain((0..29).map(|i| {
                VideoEmbedding::new(format!("w{i}"), "d", vec![1.0, i as f64], 20).unwrap()
            }))
            .collect();
        write_archive(&ok, &path).unwrap();
        let r = verify_archive(&path).unwrap();
        assert!(r.is_ok());
        assert!(r.to_string().starts_with("OK, 59 records, 2 concepts"));
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].contains("`d` has 29 videos"));
        assert!(verify_archive(dir.path().join("none.jsonl"))
            .unwrap_err()
            .is_io());
    }
}

//! Labelled attempts and their JSONL form.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::depth::DepthImage;
use crate::motion::ActionId;
use crate::pipeline::io;
use crate::{Error, Result};

/// One attempt: grasp pixel, action and outcome on image `image`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub image: usize,
    pub u: usize,
    pub v: usize,
    pub action: ActionId,
    pub success: bool,
    /// Ground-truth complexity, known only for simulated data.
    pub required: Option<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    depth: PathBuf,
    u: usize,
    v: usize,
    action: ActionId,
    label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    required: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub images: Vec<DepthImage>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push_image(&mut self, o: DepthImage) -> usize {
        self.images.push(o);
        self.images.len() - 1
    }

    pub fn push(&mut self, s: Sample) -> Result<()> {
        let o = self
            .images
            .get(s.image)
            .ok_or_else(|| Error::Data(format!("sample refers to missing image {}", s.image)))?;
        if !o.contains(s.u, s.v) {
            return Err(Error::Data(format!("sample grasp ({}, {}) outside its image", s.u, s.v)));
        }
        self.samples.push(s);
        Ok(())
    }

    /// A dataset with the samples at `idx` (in that order), sharing only
    /// the images they use.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut map = BTreeMap::new();
        let mut out = Dataset::default();
        for &i in idx {
            let s = &self.samples[i];
            let image = *map
                .entry(s.image)
                .or_insert_with(|| out.push_image(self.images[s.image].clone()));
            out.samples.push(Sample { image, ..s.clone() });
        }
        out
    }

    pub fn action_counts(&self) -> [usize; 7] {
        let mut c = [0; 7];
        for s in &self.samples {
            c[s.action.complexity() as usize] += 1;
        }
        c
    }

    /// Writes `images/NNNNN.pgm` next to `jsonl` and one line per sample
    /// with the image path relative to the JSONL file.
    pub fn save(&self, jsonl: &Path) -> Result<()> {
        let dir = jsonl.parent().unwrap_or(Path::new(""));
        let stem = jsonl.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let rel_dir = PathBuf::from(format!("{stem}_images"));
        let mut text = String::new();
        for (i, o) in self.images.iter().enumerate() {
            io::write_atomic(&dir.join(&rel_dir).join(format!("{i:05}.pgm")), &o.to_pgm_bytes())?;
        }
        for s in &self.samples {
            let line = Line {
                depth: rel_dir.join(format!("{:05}.pgm", s.image)),
                u: s.u,
                v: s.v,
                action: s.action,
                label: s.success as u8,
                required: s.required,
            };
            text.push_str(&serde_json::to_string(&line)?);
            text.push('\n');
        }
        io::write_atomic(jsonl, text.as_bytes())
    }

    pub fn image_paths(&self, jsonl: &Path) -> Vec<PathBuf> {
        let dir = jsonl.parent().unwrap_or(Path::new(""));
        let stem = jsonl.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (0..self.images.len())
            .map(|i| dir.join(format!("{stem}_images")).join(format!("{i:05}.pgm")))
            .collect()
    }

    pub fn load(jsonl: &Path) -> Result<Dataset> {
        let dir = jsonl.parent().unwrap_or(Path::new(""));
        let f = std::fs::File::open(jsonl).map_err(|e| Error::io(jsonl, e))?;
        let mut out = Dataset::default();
        let mut by_path: BTreeMap<PathBuf, usize> = BTreeMap::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(jsonl, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(&line).map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
            if l.label > 1 {
                return Err(Error::Parse { line: n + 1, msg: format!("label must be 0 or 1, got {}", l.label) });
            }
            let image = match by_path.get(&l.depth) {
                Some(&i) => i,
                None => {
                    let o = DepthImage::load_pgm(&dir.join(&l.depth))?;
                    let i = out.push_image(o);
                    by_path.insert(l.depth.clone(), i);
                    i
                }
            };
            out.push(Sample {
                image,
                u: l.u,
                v: l.v,
                action: l.action,
                success: l.label == 1,
                required: l.required,
            })
            .map_err(|e| Error::Parse { line: n + 1, msg: e.to_string() })?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = Dataset::default();
        let a = d.push_image(DepthImage::filled(64, 64, 3.0, 20));
        let b = d.push_image(DepthImage::filled(64, 64, 3.0, 30));
        d.push(Sample { image: a, u: 1, v: 2, action: ActionId::F, success: true, required: Some(2) }).unwrap();
        d.push(Sample { image: b, u: 3, v: 4, action: ActionId::Dl, success: false, required: None }).unwrap();
        d.push(Sample { image: a, u: 5, v: 6, action: ActionId::Tfs, success: true, required: None }).unwrap();
        assert!(d.push(Sample { image: a, u: 64, v: 0, action: ActionId::Dl, success: true, required: None }).is_err());
        let path = dir.path().join("set.jsonl");
        d.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), d);
        let sub = d.subset(&[2, 1]);
        assert_eq!(sub.images.len(), 2);
        assert_eq!(sub.samples[0].u, 5);
        assert_eq!(sub.images[sub.samples[1].image].get(0, 0), 30);
    }

    #[test]
    fn bad_lines_report_their_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "\n{\"depth\":\"x.pgm\"}\n").unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Parse { line: 2, .. })));
    }
}

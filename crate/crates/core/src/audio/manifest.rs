//! JSON-lines corpus manifest: one `{utterance_id, path, class, split,
//! duration_s}` object per line. Relative paths resolve against the
//! manifest's directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::Corpus;
use super::wav::{read_wav, write_wav};
use super::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub path: String,
    pub class: u32,
    pub split: Split,
    pub duration_s: f64,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line)
            .map_err(|err| Error::format(path, format!("line {}: {err}", i + 1)))?;
        entries.push(e);
    }
    Ok(entries)
}

fn resolve(manifest: &Path, entry: &ManifestEntry) -> PathBuf {
    let p = Path::new(&entry.path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest.parent().unwrap_or_else(|| Path::new(".")).join(p)
    }
}

/// Reads every utterance of `split`, labelled from the manifest.
pub fn load_split(manifest: &Path, split: Split) -> Result<Vec<Waveform>> {
    load_manifest(manifest)?
        .into_iter()
        .filter(|e| e.split == split)
        .map(|e| {
            let mut w = read_wav(&resolve(manifest, &e))?;
            w.label = e.class;
            w.utterance_id = e.utterance_id;
            Ok(w)
        })
        .collect()
}

/// Writes `wav/<utterance_id>.wav` for every utterance and `manifest.jsonl`
/// under `dir`, returning the manifest path.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<PathBuf> {
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let manifest_path = dir.join("manifest.jsonl");
    let mut out = Vec::new();
    let all = corpus
        .train
        .iter()
        .map(|w| (w, Split::Train))
        .chain(corpus.test.iter().map(|w| (w, Split::Test)));
    for (w, split) in all {
        let rel = format!("wav/{}.wav", w.utterance_id);
        write_wav(&dir.join(&rel), &w.samples, w.sample_rate)?;
        let entry = ManifestEntry {
            utterance_id: w.utterance_id.clone(),
            path: rel,
            class: w.label,
            split,
            duration_s: w.duration_s(),
        };
        serde_json::to_writer(&mut out, &entry).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    f.write_all(&out).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

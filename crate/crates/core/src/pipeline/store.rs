//! Directory layout for extracted features.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{FeatureModels, FeatureSet, TargetTable};
use crate::dataset::{Split, Target};
use crate::error::{Error, Result};
use crate::fsio::{read_to_string, write_atomic};
use crate::selection::FeatureMatrix;

/// Matrix files written by [`FeatureSet::save`], one per feature family.
pub const FEATURE_FILES: [&str; 4] = ["audio.csv", "sentiment.csv", "tfidf_pca.csv", "xanew_pca.csv"];
pub const TARGETS_FILE: &str = "targets.csv";
/// Model files under `models/`, in the order of [`FeatureModels`] fields.
pub const MODEL_FILES: [&str; 5] = [
    "feature_config.json",
    "vocabulary.json",
    "tfidf_pca.json",
    "xanew_valence_pca.json",
    "xanew_arousal_pca.json",
];

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

impl TargetTable {
    fn write_csv(&self, ids: &[String], path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Format(format!("targets csv: {e}"));
        w.write_record(["song_id", "split", "valence", "arousal"]).map_err(err)?;
        for (i, id) in ids.iter().enumerate() {
            w.write_record([
                id.as_str(),
                self.splits[i].as_str(),
                &self.valence[i].to_string(),
                &self.arousal[i].to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(format!("targets csv: {e}")))?;
        write_atomic(path, &bytes)
    }

    fn read_csv(path: &Path) -> Result<(Vec<String>, TargetTable)> {
        let name = path.display().to_string();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(f);
        let header = rdr.headers().map_err(|e| Error::ingest(&name, 1, e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["song_id", "split", "valence", "arousal"] {
            return Err(Error::ingest(&name, 1, "expected header song_id,split,valence,arousal"));
        }
        let (mut ids, mut splits, mut val, mut aro) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::ingest(&name, line, e.to_string()))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::ingest(&name, line, format!("bad target {s:?}")))
            };
            ids.push(rec[0].to_string());
            splits.push(Split::parse(&rec[1]).ok_or_else(|| Error::ingest(&name, line, format!("bad split {:?}", &rec[1])))?);
            val.push(num(&rec[2])?);
            aro.push(num(&rec[3])?);
        }
        Ok((ids, TargetTable::new(val, aro, splits)?))
    }
}

impl FeatureSet {
    /// Write matrices, targets and (if present) fitted models into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.check_aligned()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (m, file) in [&self.audio, &self.sentiment, &self.tfidf, &self.xanew].iter().zip(FEATURE_FILES) {
            m.write_csv_file(&dir.join(file))?;
        }
        self.targets.write_csv(self.row_ids(), &dir.join(TARGETS_FILE))?;
        if let Some(models) = &self.models {
            let mdir = dir.join("models");
            std::fs::create_dir_all(&mdir).map_err(|e| Error::io(&mdir, e))?;
            write_json(&mdir.join(MODEL_FILES[0]), &models.config)?;
            write_json(&mdir.join(MODEL_FILES[1]), &models.vocabulary)?;
            write_json(&mdir.join(MODEL_FILES[2]), &models.tfidf_pca)?;
            write_json(&mdir.join(MODEL_FILES[3]), &models.xanew_valence_pca)?;
            write_json(&mdir.join(MODEL_FILES[4]), &models.xanew_arousal_pca)?;
        }
        Ok(())
    }

    /// Read a directory written by [`FeatureSet::save`]. Models are loaded
    /// when the `models/` directory exists.
    pub fn load(dir: &Path) -> Result<FeatureSet> {
        let mut blocks = FEATURE_FILES
            .iter()
            .map(|f| FeatureMatrix::read_csv_file(&dir.join(f)))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let (ids, targets) = TargetTable::read_csv(&dir.join(TARGETS_FILE))?;
        let mdir = dir.join("models");
        let models = if mdir.is_dir() {
            Some(FeatureModels {
                config: read_json(&mdir.join(MODEL_FILES[0]))?,
                vocabulary: read_json(&mdir.join(MODEL_FILES[1]))?,
                tfidf_pca: read_json(&mdir.join(MODEL_FILES[2]))?,
                xanew_valence_pca: read_json(&mdir.join(MODEL_FILES[3]))?,
                xanew_arousal_pca: read_json(&mdir.join(MODEL_FILES[4]))?,
            })
        } else {
            None
        };
        let set = FeatureSet {
            audio: blocks.next().expect("four blocks"),
            sentiment: blocks.next().expect("four blocks"),
            tfidf: blocks.next().expect("four blocks"),
            xanew: blocks.next().expect("four blocks"),
            targets,
            models,
        };
        set.check_aligned()?;
        if set.row_ids() != ids.as_slice() {
            return Err(Error::InvalidArgument(format!("{TARGETS_FILE} lists different rows than the feature files")));
        }
        Ok(set)
    }

    /// Training-split target values.
    pub fn train_targets(&self, target: Target) -> Result<Vec<f64>> {
        self.targets.values(target, &self.targets.indices(Split::Train))
    }
}

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{read_to_string, write_csv, DatasetError, Label};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            stratified: true,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    Train,
    Test,
}

impl Part {
    fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Test => "test",
        }
    }
}

/// Assignment of labeled rows to train or test; unlabeled rows get neither.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub ids: Vec<String>,
    pub parts: Vec<Part>,
}

impl Split {
    /// Labeled rows are shuffled per class (or all together when not
    /// stratified) and the first `round(fraction * n)` go to training.
    pub fn new(ids: &[String], labels: &[Label], spec: SplitSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let labeled: Vec<usize> = (0..ids.len()).filter(|&i| labels[i].is_labeled()).collect();
        let groups: Vec<Vec<usize>> = if spec.stratified {
            [Label::Gamble, Label::NonGamble]
                .iter()
                .map(|c| {
                    labeled
                        .iter()
                        .copied()
                        .filter(|&i| labels[i] == *c)
                        .collect()
                })
                .collect()
        } else {
            vec![labeled]
        };
        let mut part = vec![None; ids.len()];
        for mut g in groups {
            g.shuffle(&mut rng);
            let n_train = (spec.train_fraction * g.len() as f64).round() as usize;
            for (k, &i) in g.iter().enumerate() {
                part[i] = Some(if k < n_train { Part::Train } else { Part::Test });
            }
        }
        let (ids, parts) = ids
            .iter()
            .zip(part)
            .filter_map(|(id, p)| p.map(|p| (id.clone(), p)))
            .unzip();
        Split { ids, parts }
    }

    pub fn lookup(&self) -> HashMap<&str, Part> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.parts.iter().copied())
            .collect()
    }

    /// Row indices of `ids` that fall into `part`, in row order.
    pub fn indices(&self, ids: &[String], part: Part) -> Vec<usize> {
        let lookup = self.lookup();
        (0..ids.len())
            .filter(|&i| lookup.get(ids[i].as_str()) == Some(&part))
            .collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let rows = self
            .ids
            .iter()
            .zip(&self.parts)
            .map(|(id, p)| vec![id.clone(), p.as_str().to_string()]);
        write_csv(path.as_ref(), &["id", "part"], rows)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next() != Some("id,part") {
            return Err(DatasetError::Header {
                path: path.to_path_buf(),
                expected: "id,part".into(),
            });
        }
        let mut split = Split::default();
        for (n, line) in lines.enumerate() {
            let (id, part) = line
                .split_once(',')
                .ok_or_else(|| DatasetError::format(path, format!("bad row at line {}", n + 2)))?;
            let part = match part {
                "train" => Part::Train,
                "test" => Part::Test,
                other => {
                    return Err(DatasetError::format(
                        path,
                        format!("unknown part `{other}` at line {}", n + 2),
                    ))
                }
            };
            split.ids.push(id.to_string());
            split.parts.push(part);
        }
        Ok(split)
    }
}

//! Plain-text model files. Floats are written in shortest round-trip form,
//! so a save/load cycle reproduces every prediction bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::ensemble::BoostedEnsemble;
use super::tree::{Node, Tree};
use super::ModelError;
use crate::dataset::schema_digest;

const MAGIC: &str = "gamblescan-gbdt v1";
const OBJECTIVE: &str = "binary-logistic";

impl BoostedEnsemble {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "objective={OBJECTIVE}");
        let _ = writeln!(s, "learning_rate={}", self.learning_rate);
        let _ = writeln!(s, "base_score={}", self.base_score);
        let _ = writeln!(s, "schema_digest={}", self.schema_digest);
        for name in &self.feature_names {
            let _ = writeln!(s, "feature={name}");
        }
        let _ = writeln!(s, "trees={}", self.trees.len());
        for (i, t) in self.trees.iter().enumerate() {
            let _ = writeln!(s, "tree={i} nodes={}", t.nodes.len());
            for node in &t.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        default_left,
                        left,
                        right,
                    } => {
                        let dir = if *default_left { "L" } else { "R" };
                        let _ = writeln!(s, "split {feature} {threshold} {dir} {left} {right}");
                    }
                    Node::Leaf { weight } => {
                        let _ = writeln!(s, "leaf {weight}");
                    }
                }
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ModelError> {
        Parser {
            lines: text.lines().enumerate().peekable(),
            path: path.to_path_buf(),
            line: 0,
        }
        .model()
    }
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    path: PathBuf,
    line: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ModelError {
        ModelError::Parse {
            path: self.path.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str, ModelError> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end())
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn field(&mut self, key: &str) -> Result<&'a str, ModelError> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| self.err(format!("expected `{key}=`")))
    }

    fn number<T: std::str::FromStr>(&self, text: &str, what: &str) -> Result<T, ModelError> {
        text.parse()
            .map_err(|_| self.err(format!("bad {what} `{text}`")))
    }

    fn model(mut self) -> Result<BoostedEnsemble, ModelError> {
        if self.next()? != MAGIC {
            return Err(self.err(format!("not a model file (expected `{MAGIC}`)")));
        }
        let objective = self.field("objective")?;
        if objective != OBJECTIVE {
            return Err(self.err(format!("unsupported objective `{objective}`")));
        }
        let learning_rate = self.field("learning_rate")?;
        let learning_rate: f64 = self.number(learning_rate, "learning rate")?;
        let base_score = self.field("base_score")?;
        let base_score: f64 = self.number(base_score, "base score")?;
        let digest = self.field("schema_digest")?.to_string();
        let mut feature_names = Vec::new();
        while let Some((_, l)) = self.lines.peek() {
            match l.strip_prefix("feature=") {
                Some(name) => {
                    feature_names.push(name.trim_end().to_string());
                    self.next()?;
                }
                None => break,
            }
        }
        if schema_digest(&feature_names) != digest {
            return Err(self.err("schema digest does not match the listed features"));
        }
        let count = self.field("trees")?;
        let count: usize = self.number(count, "tree count")?;
        let mut trees = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let header = self.next()?;
            let n_nodes = header
                .strip_prefix(&format!("tree={i} nodes="))
                .ok_or_else(|| self.err(format!("expected header of tree {i}")))?;
            let n_nodes: usize = self.number(n_nodes, "node count")?;
            let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
            for _ in 0..n_nodes {
                let line = self.next()?;
                nodes.push(self.node(line)?);
            }
            let tree = Tree { nodes };
            tree.validate(feature_names.len())
                .map_err(|m| self.err(format!("tree {i}: {m}")))?;
            trees.push(tree);
        }
        if self.next()? != "end" {
            return Err(self.err("expected `end`"));
        }
        Ok(BoostedEnsemble {
            trees,
            learning_rate,
            base_score,
            feature_names,
            schema_digest: digest,
        })
    }

    fn node(&self, line: &str) -> Result<Node, ModelError> {
        let parts: Vec<&str> = line.split(' ').collect();
        match parts.as_slice() {
            ["leaf", w] => Ok(Node::Leaf {
                weight: self.number(w, "leaf weight")?,
            }),
            ["split", f, t, dir, l, r] => Ok(Node::Split {
                feature: self.number(f, "feature index")?,
                threshold: self.number(t, "threshold")?,
                default_left: match *dir {
                    "L" => true,
                    "R" => false,
                    other => return Err(self.err(format!("bad default direction `{other}`"))),
                },
                left: self.number(l, "child index")?,
                right: self.number(r, "child index")?,
            }),
            _ => Err(self.err(format!("bad node line `{line}`"))),
        }
    }
}

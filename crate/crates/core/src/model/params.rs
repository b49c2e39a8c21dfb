use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::features::FEATURE_VERSION;
use super::ModelError;

pub const FORMAT_VERSION: u32 = 1;

/// Fingerprint placeholder for components that do not use a tag vocabulary.
pub const NO_VOCAB: &str = "-";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Generator,
    Classifier,
    Transition,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Generator => "generator",
            Component::Classifier => "classifier",
            Component::Transition => "transition",
        })
    }
}

impl FromStr for Component {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generator" => Ok(Component::Generator),
            "classifier" => Ok(Component::Classifier),
            "transition" => Ok(Component::Transition),
            _ => Err(format!("unknown component {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_210_501;

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: 0.1,
            epochs: 10,
            seed: DEFAULT_SEED,
        }
    }
}

/// Weights of a log-linear scorer: one dense row over the output labels per
/// feature string. Features never updated have no row (all-zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub component: Component,
    pub hyper: Hyper,
    pub vocab_fingerprint: String,
    pub inventory_fingerprint: String,
    labels: Vec<String>,
    weights: HashMap<String, Vec<f64>>,
}

impl ModelParameters {
    pub fn new(
        component: Component,
        labels: Vec<String>,
        hyper: Hyper,
        vocab_fingerprint: String,
        inventory_fingerprint: String,
    ) -> Self {
        ModelParameters {
            component,
            hyper,
            vocab_fingerprint,
            inventory_fingerprint,
            labels,
            weights: HashMap::new(),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn weight(&self, feature: &str, label: usize) -> f64 {
        self.weights.get(feature).map_or(0.0, |row| row[label])
    }

    pub fn set_weight(&mut self, feature: &str, label: usize, value: f64) {
        self.row_mut(feature)[label] = value;
    }

    pub(crate) fn row(&self, feature: &str) -> Option<&[f64]> {
        self.weights.get(feature).map(Vec::as_slice)
    }

    pub(crate) fn row_mut(&mut self, feature: &str) -> &mut Vec<f64> {
        let n = self.labels.len();
        self.weights.entry(feature.to_string()).or_insert_with(|| vec![0.0; n])
    }

    /// Linear scores of every label for a feature bundle.
    pub fn scores(&self, features: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.labels.len()];
        for f in features {
            if let Some(row) = self.row(f) {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w;
                }
            }
        }
        out
    }

    /// Features that have a row, sorted.
    pub fn features(&self) -> Vec<&str> {
        let mut f: Vec<&str> = self.weights.keys().map(String::as_str).collect();
        f.sort_unstable();
        f
    }

    /// Drops rows that are entirely zero.
    pub fn prune(&mut self) {
        self.weights.retain(|_, row| row.iter().any(|&w| w != 0.0));
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights
            .values()
            .map(|row| row.iter().filter(|&&w| w != 0.0).count())
            .sum()
    }

    pub fn to_text(&self) -> String {
        let sorted: BTreeMap<&String, &Vec<f64>> = self.weights.iter().collect();
        let mut lines = Vec::new();
        for (feature, row) in sorted {
            for (label, &w) in self.labels.iter().zip(row) {
                if w != 0.0 {
                    lines.push(format!("{feature}\t{label}\t{w}"));
                }
            }
        }
        let mut out = String::new();
        out.push_str(&format!("format={FORMAT_VERSION}\n"));
        out.push_str(&format!("component={}\n", self.component));
        out.push_str(&format!("vocab_fingerprint={}\n", self.vocab_fingerprint));
        out.push_str(&format!("inventory_fingerprint={}\n", self.inventory_fingerprint));
        out.push_str(&format!("features=v{FEATURE_VERSION}\n"));
        out.push_str(&format!("learning_rate={}\n", self.hyper.learning_rate));
        out.push_str(&format!("epochs={}\n", self.hyper.epochs));
        out.push_str(&format!("seed={}\n", self.hyper.seed));
        out.push_str(&format!("labels={}\n", self.labels.join("\t")));
        out.push_str(&format!("entries={}\n", lines.len()));
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let mut header: HashMap<&str, &str> = HashMap::new();
        let mut body = Vec::new();
        let mut in_body = false;
        for (i, line) in text.lines().enumerate() {
            if line == "#" || line.starts_with("# ") || line.is_empty() {
                continue;
            }
            if !in_body {
                if let Some((key, value)) = line.split_once('=') {
                    if !key.contains('\t') {
                        header.insert(key, value);
                        if key == "entries" {
                            in_body = true;
                        }
                        continue;
                    }
                }
                return Err(corrupt(i + 1, "header ended before entries="));
            }
            body.push((i + 1, line));
        }
        let get = |key: &str| {
            header
                .get(key)
                .copied()
                .ok_or_else(|| corrupt(0, &format!("missing header field {key}")))
        };
        let format = get("format")?;
        if format != FORMAT_VERSION.to_string() {
            return Err(ModelError::VersionMismatch {
                found: format.to_string(),
                expected: FORMAT_VERSION.to_string(),
            });
        }
        let features = get("features")?;
        if features != format!("v{FEATURE_VERSION}") {
            return Err(ModelError::VersionMismatch {
                found: format!("features={features}"),
                expected: format!("features=v{FEATURE_VERSION}"),
            });
        }
        let component = get("component")?.parse::<Component>().map_err(|e| corrupt(0, &e))?;
        let number = |key: &str| -> Result<f64, ModelError> {
            get(key)?.parse::<f64>().map_err(|_| corrupt(0, &format!("bad {key}")))
        };
        let hyper = Hyper {
            learning_rate: number("learning_rate")?,
            epochs: get("epochs")?.parse().map_err(|_| corrupt(0, "bad epochs"))?,
            seed: get("seed")?.parse().map_err(|_| corrupt(0, "bad seed"))?,
        };
        let labels: Vec<String> = match get("labels")? {
            "" => Vec::new(),
            l => l.split('\t').map(str::to_string).collect(),
        };
        let entries: usize = get("entries")?.parse().map_err(|_| corrupt(0, "bad entries count"))?;
        if body.len() != entries {
            return Err(corrupt(
                0,
                &format!("expected {entries} weight lines, found {} (truncated?)", body.len()),
            ));
        }
        let label_index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut params = ModelParameters::new(
            component,
            labels.clone(),
            hyper,
            get("vocab_fingerprint")?.to_string(),
            get("inventory_fingerprint")?.to_string(),
        );
        for (line_no, line) in body {
            let mut parts = line.split('\t');
            let (Some(feature), Some(label), Some(weight), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(corrupt(line_no, "expected feature<TAB>label<TAB>weight"));
            };
            let &label = label_index
                .get(label)
                .ok_or_else(|| corrupt(line_no, &format!("unknown label {label:?}")))?;
            let weight: f64 = weight
                .parse()
                .ok()
                .filter(|w: &f64| w.is_finite())
                .ok_or_else(|| corrupt(line_no, &format!("bad weight {weight:?}")))?;
            params.set_weight(feature, label, weight);
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_text()).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    /// Checks that the model belongs to the given component and artifacts.
    pub fn ensure_compatible(
        &self,
        component: Component,
        labels: &[String],
        vocab_fingerprint: &str,
        inventory_fingerprint: &str,
    ) -> Result<(), ModelError> {
        if self.component != component {
            return Err(ModelError::ComponentMismatch {
                expected: component,
                found: self.component,
            });
        }
        if self.vocab_fingerprint != vocab_fingerprint {
            return Err(ModelError::FingerprintMismatch {
                what: "vocabulary",
                expected: vocab_fingerprint.to_string(),
                found: self.vocab_fingerprint.clone(),
            });
        }
        if self.inventory_fingerprint != inventory_fingerprint {
            return Err(ModelError::FingerprintMismatch {
                what: "inventory",
                expected: inventory_fingerprint.to_string(),
                found: self.inventory_fingerprint.clone(),
            });
        }
        if self.labels != labels {
            return Err(ModelError::FingerprintMismatch {
                what: "label set",
                expected: format!("{} labels", labels.len()),
                found: format!("{} labels", self.labels.len()),
            });
        }
        Ok(())
    }
}

fn corrupt(line: usize, message: &str) -> ModelError {
    ModelError::Corrupt {
        line,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelParameters {
        let mut p = ModelParameters::new(
            Component::Generator,
            vec!["EOS".into(), "(".into(), "NP".into()],
            Hyper::default(),
            "abc".into(),
            "def".into(),
        );
        p.set_weight("w=dog", 1, 0.1 + 0.2);
        p.set_weight("w=dog", 2, -1.0e-17);
        p.set_weight("bias", 0, std::f64::consts::PI);
        p
    }

    #[test]
    fn text_roundtrip_is_bit_exact() {
        let p = sample();
        let back = ModelParameters::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.weight("w=dog", 1).to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(back.to_text(), p.to_text());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let p = sample();
        p.save(&path).unwrap();
        assert_eq!(ModelParameters::load(&path).unwrap(), p);
    }

    #[test]
    fn header_has_required_fields() {
        let text = sample().to_text();
        for field in [
            "format=1",
            "component=generator",
            "vocab_fingerprint=abc",
            "inventory_fingerprint=def",
        ] {
            assert!(text.lines().any(|l| l == field), "{field}");
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let text = sample().to_text();
        let cut: Vec<&str> = text.lines().collect();
        let truncated = cut[..cut.len() - 1].join("\n");
        assert!(matches!(
            ModelParameters::from_text(&truncated),
            Err(ModelError::Corrupt { .. })
        ));
        let half = &text[..text.len() / 2];
        assert!(ModelParameters::from_text(half).is_err());
    }

    #[test]
    fn version_mismatch() {
        let text = sample().to_text().replace("format=1", "format=2");
        assert!(matches!(
            ModelParameters::from_text(&text),
            Err(ModelError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn fingerprint_mismatch() {
        let p = sample();
        let labels = p.labels().to_vec();
        assert!(p.ensure_compatible(Component::Generator, &labels, "abc", "def").is_ok());
        assert!(matches!(
            p.ensure_compatible(Component::Generator, &labels, "zzz", "def"),
            Err(ModelError::FingerprintMismatch { what: "vocabulary", .. })
        ));
        assert!(matches!(
            p.ensure_compatible(Component::Classifier, &labels, "abc", "def"),
            Err(ModelError::ComponentMismatch { .. })
        ));
    }

    #[test]
    fn prune_drops_zero_rows() {
        let mut p = sample();
        p.row_mut("unused");
        assert_eq!(p.features().len(), 3);
        p.prune();
        assert_eq!(p.features(), ["bias", "w=dog"]);
    }
}

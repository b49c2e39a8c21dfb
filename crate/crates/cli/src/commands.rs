use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use catgen::corpus::{read_corpus, write_labels};
use catgen::decode::{illegal_rate, parse_dump, BeamConfig, DecodeResult, Tagger, DEFAULT_BEAM, DEFAULT_MAX_STEPS};
use catgen::eval::{render_report, EvalReport, ReportFormat, DEFAULT_BUCKETS, DEFAULT_KS};
use catgen::model::{
    classifier_distribution, train_classifier, train_generator, train_transition, Component, ContextVector, Hyper,
    ModelParameters, DEFAULT_SEED,
};
use catgen::rerank::{report_line, rerank_position, RerankConfig, DEFAULT_LAMBDA, DEFAULT_NU};
use catgen::transition::DEFAULT_MAX_ACTIONS;
use catgen::{
    Category, CorpusFormat, LabelInventory, OracleKind, OracleSpec, TagVocabulary, TaggedSentence, TransitionSystem,
    UNK,
};

use crate::config::{pick, FileConfig, Header};
use crate::{BuildVocabArgs, CorpusArgs, EvalArgs, RerankArgs, TagArgs, TraceArgs, TrainArgs};

const DEFAULT_THRESHOLD: u64 = 10;
const DEFAULT_N: usize = 2;
const DEFAULT_K: usize = 10;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Writes `header` and `body` to `path`, or only `body` to standard output.
fn emit(path: Option<&Path>, header: &Header, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, header.render() + body).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn load_corpus(
    args: &CorpusArgs,
    file: &FileConfig,
    header: &mut Header,
) -> Result<(Vec<TaggedSentence>, CorpusFormat)> {
    let format: CorpusFormat = pick(args.format.clone(), file.format.clone(), "pipe".into())
        .parse()
        .map_err(|e: String| anyhow!(e))?;
    header.path("corpus", &args.corpus).set("format", format);
    let corpus = read_corpus(&args.corpus, format).with_context(|| format!("in {}", args.corpus.display()))?;
    Ok((corpus, format))
}

fn load_inventory(path: &Path, header: &mut Header) -> Result<LabelInventory> {
    header.path("inventory", path);
    LabelInventory::from_text(&read_text(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_vocab(path: &Path, header: &mut Header) -> Result<TagVocabulary> {
    header.path("vocab", path);
    TagVocabulary::from_text(&read_text(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_model(path: &Path, header: &mut Header) -> Result<ModelParameters> {
    header.path("model", path);
    ModelParameters::load(path).context("cannot load model")
}

fn oracle_spec(a: &BuildVocabArgs, file: &FileConfig) -> Result<OracleSpec> {
    let kind: OracleKind = pick(a.oracle.clone(), file.oracle.clone(), "ac".into()).parse()?;
    let n = pick(a.n, file.n, DEFAULT_N);
    let k = pick(a.k, file.k, DEFAULT_K);
    let mut spec = match kind {
        OracleKind::Ac => OracleSpec::ac(),
        OracleKind::Pa => OracleSpec::pa(k),
        OracleKind::Ng => OracleSpec::ng(n, k),
        OracleKind::Or => OracleSpec::or(),
    };
    if a.nondet || file.nondet.unwrap_or(false) {
        spec = spec.nondeterministic();
    }
    spec.validate()?;
    Ok(spec)
}

pub fn build_vocab(a: BuildVocabArgs, file: &FileConfig) -> Result<()> {
    let mut header = Header::new("build-vocab");
    let (corpus, _) = load_corpus(&a.input, file, &mut header)?;
    let spec = oracle_spec(&a, file)?;
    let threshold = pick(a.threshold, file.threshold, DEFAULT_THRESHOLD);
    header
        .set("oracle", spec.kind)
        .set("n", spec.n)
        .set("k", spec.k)
        .set("deterministic", spec.deterministic)
        .set("threshold", threshold);
    let inv = LabelInventory::build(&corpus, threshold)?;
    let vocab = TagVocabulary::build(&inv, spec)?;
    let mean = vocab.mean_length(&inv)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    emit(Some(&a.out.join("inventory.txt")), &header, &inv.to_text())?;
    emit(Some(&a.out.join("vocab.txt")), &header, &vocab.to_text())?;
    println!(
        "tags={} mean_length={mean:.4} kept={} distinct={}",
        vocab.len(),
        inv.len(),
        inv.distinct()
    );
    Ok(())
}

pub fn train(a: TrainArgs, file: &FileConfig) -> Result<()> {
    let mut header = Header::new("train");
    let (corpus, _) = load_corpus(&a.input, file, &mut header)?;
    let component: Component = pick(a.component.clone(), file.component.clone(), "generator".into())
        .parse()
        .map_err(|e: String| anyhow!(e))?;
    header.set("component", component);
    let inv = match &a.inventory {
        Some(p) => load_inventory(p, &mut header)?,
        None => {
            let threshold = pick(a.threshold, file.threshold, DEFAULT_THRESHOLD);
            header.set("threshold", threshold);
            LabelInventory::build(&corpus, threshold)?
        }
    };
    let defaults = Hyper::default();
    let hyper = Hyper {
        learning_rate: pick(a.lr, file.lr, defaults.learning_rate),
        epochs: pick(a.epochs, file.epochs, defaults.epochs),
        seed: pick(a.seed, file.seed, DEFAULT_SEED),
    };
    header
        .set("epochs", hyper.epochs)
        .set("lr", hyper.learning_rate)
        .set("seed", hyper.seed);
    let outcome = match component {
        Component::Generator => {
            let path = a.vocab.as_deref().context("--vocab is required for the generator")?;
            let vocab = load_vocab(path, &mut header)?;
            train_generator(&corpus, &inv, &vocab, hyper)?
        }
        Component::Classifier => train_classifier(&corpus, &inv, hyper)?,
        Component::Transition => train_transition(&corpus, &inv, &TransitionSystem::default(), hyper)?,
    };
    for (i, loss) in outcome.epoch_losses.iter().enumerate() {
        eprintln!("epoch {} loss={loss:.6}", i + 1);
    }
    emit(Some(&a.out), &header, &outcome.params.to_text())
}

fn prediction_labels(tags: &[Option<Category>]) -> Vec<String> {
    tags.iter()
        .map(|t| t.as_ref().map_or_else(|| UNK.to_string(), Category::to_string))
        .collect()
}

pub fn tag(a: TagArgs, file: &FileConfig) -> Result<()> {
    let mut header = Header::new("tag");
    let (corpus, format) = load_corpus(&a.input, file, &mut header)?;
    let mode: Component = match pick(a.mode.clone(), file.mode.clone(), "tagwise".into()).as_str() {
        "tagwise" => Component::Generator,
        "classifier" => Component::Classifier,
        "transition" => Component::Transition,
        other => bail!("unknown mode {other:?} (expected classifier, tagwise or transition)"),
    };
    let inv = load_inventory(&a.inventory, &mut header)?;
    let params = load_model(&a.model, &mut header)?;
    let beam = pick(a.beam, file.beam, DEFAULT_BEAM);
    let kbest = pick(a.kbest, file.kbest, beam);
    ensure!(beam >= 1 && kbest >= 1, "--beam and --kbest must be at least 1");
    let default_steps = match mode {
        Component::Transition => DEFAULT_MAX_ACTIONS,
        _ => DEFAULT_MAX_STEPS,
    };
    let cfg = BeamConfig {
        beam,
        kbest,
        max_steps: pick(a.max_steps, file.max_steps, default_steps),
    };
    let vocab;
    let sys = TransitionSystem::default();
    let atoms = inv.atoms();
    let tagger = match mode {
        Component::Classifier => {
            header.set("mode", "classifier");
            Tagger::classifier(&inv, &params)?
        }
        Component::Generator => {
            let path = a.vocab.as_deref().context("--vocab is required in tagwise mode")?;
            vocab = load_vocab(path, &mut header)?;
            header.set("mode", "tagwise");
            Tagger::tagwise(&vocab, &inv, &params, cfg)?
        }
        Component::Transition => {
            header.set("mode", "transition");
            Tagger::transition(&sys, &inv, &atoms, &params, cfg)?
        }
    };
    if mode != Component::Classifier {
        header
            .set("beam", cfg.beam)
            .set("kbest", cfg.kbest)
            .set("max_steps", cfg.max_steps);
    } else if a.dump.is_some() {
        bail!("--dump needs a generator mode");
    }

    let mut labels = Vec::with_capacity(corpus.len());
    let mut dump = String::new();
    let mut all_results: Vec<DecodeResult> = Vec::new();
    for (si, s) in corpus.iter().enumerate() {
        match tagger.decode_sentence(&s.words) {
            Some(results) => {
                let best: Vec<Option<Category>> = results.iter().map(|r| r.best_legal().cloned()).collect();
                labels.push(prediction_labels(&best));
                for r in &results {
                    for line in r.dump_lines(si) {
                        dump.push_str(&line);
                        dump.push('\n');
                    }
                }
                all_results.extend(results);
            }
            None => labels.push(prediction_labels(&tagger.tag_sentence(&s.words))),
        }
    }
    if let Some(path) = &a.dump {
        emit(Some(path), &header, &dump)?;
    }
    emit(a.out.as_deref(), &header, &write_labels(&corpus, &labels, format))?;
    if mode != Component::Classifier {
        eprintln!("illegal_rate={:?}", illegal_rate(&all_results, cfg.kbest));
    }
    Ok(())
}

/// Dump entries keyed by (sentence, word); every corpus position must be covered.
fn read_dump(path: &Path, corpus: &[TaggedSentence]) -> Result<BTreeMap<(usize, usize), DecodeResult>> {
    let entries = parse_dump(&read_text(path)?).with_context(|| format!("in {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (si, r) in entries {
        let key = (si, r.word_index);
        let in_range = corpus.get(si).is_some_and(|s| r.word_index < s.len());
        ensure!(in_range, "{}: position {key:?} is not in the corpus", path.display());
        ensure!(
            map.insert(key, r).is_none(),
            "{}: position {key:?} appears twice",
            path.display()
        );
    }
    let expected: usize = corpus.iter().map(TaggedSentence::len).sum();
    ensure!(
        map.len() == expected,
        "{}: covers {} of {expected} corpus positions",
        path.display(),
        map.len()
    );
    Ok(map)
}

fn source_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn rerank(a: RerankArgs, file: &FileConfig) -> Result<()> {
    let mut header = Header::new("rerank");
    let (corpus, format) = load_corpus(&a.input, file, &mut header)?;
    let inv = load_inventory(&a.inventory, &mut header)?;
    let params = load_model(&a.model, &mut header)?;
    Tagger::classifier(&inv, &params)?;
    let cfg = RerankConfig {
        lambda: pick(a.lambda, file.lambda, DEFAULT_LAMBDA),
        nu: pick(a.nu, file.nu, DEFAULT_NU),
    };
    header.set("lambda", cfg.lambda).set("nu", cfg.nu);
    let mut dumps = Vec::new();
    for path in &a.dump {
        header.path("dump", path);
        dumps.push((source_name(path), read_dump(path, &corpus)?));
    }

    let mut labels = Vec::with_capacity(corpus.len());
    let mut report = String::new();
    let mut fallbacks = 0usize;
    for (si, s) in corpus.iter().enumerate() {
        let mut row = Vec::with_capacity(s.len());
        for wi in 0..s.len() {
            let classifier = classifier_distribution(&ContextVector::new(&s.words, wi), &inv, &params);
            let sources: Vec<(&str, &DecodeResult)> =
                dumps.iter().map(|(name, m)| (name.as_str(), &m[&(si, wi)])).collect();
            let sel = rerank_position(&sources, &classifier, &inv, cfg);
            fallbacks += usize::from(sel.fallback);
            report.push_str(&report_line(&s.words[wi], &s.gold[wi], &sel));
            report.push('\n');
            row.push(sel.chosen.category.to_string());
        }
        labels.push(row);
    }
    if let Some(path) = &a.report {
        emit(Some(path), &header, &report)?;
    }
    emit(a.out.as_deref(), &header, &write_labels(&corpus, &labels, format))?;
    eprintln!("fallbacks={fallbacks}");
    Ok(())
}

fn as_prediction(c: &Category) -> Option<Category> {
    match c {
        Category::Atom(a) if a.base() == UNK && a.feature().is_none() => None,
        other => Some(other.clone()),
    }
}

pub fn eval(a: EvalArgs, file: &FileConfig) -> Result<()> {
    let mut header = Header::new("eval");
    let (gold_corpus, format) = load_corpus(&a.input, file, &mut header)?;
    header.path("pred", &a.pred);
    let pred_corpus = read_corpus(&a.pred, format).with_context(|| format!("in {}", a.pred.display()))?;
    ensure!(
        pred_corpus.len() == gold_corpus.len(),
        "predictions have {} sentences, gold has {}",
        pred_corpus.len(),
        gold_corpus.len()
    );
    for (i, (p, g)) in pred_corpus.iter().zip(&gold_corpus).enumerate() {
        ensure!(
            p.words == g.words,
            "sentence {} differs between predictions and gold",
            i + 1
        );
    }
    let inv = load_inventory(&a.inventory, &mut header)?;
    let report_format: ReportFormat = pick(a.report_format.clone(), file.report_format.clone(), "text".into())
        .parse()
        .map_err(|e: String| anyhow!(e))?;
    let gold: Vec<Category> = gold_corpus.iter().flat_map(|s| s.gold.iter().cloned()).collect();
    let pred: Vec<Option<Category>> = pred_corpus
        .iter()
        .flat_map(|s| s.gold.iter().map(as_prediction))
        .collect();
    let kbest = match &a.dump {
        Some(path) => {
            header.path("dump", path);
            let map = read_dump(path, &gold_corpus)?;
            Some(
                map.into_values()
                    .map(|r| r.kbest.into_iter().map(|c| c.category).collect())
                    .collect::<Vec<Vec<Option<Category>>>>(),
            )
        }
        None => None,
    };
    let buckets: Vec<String> = DEFAULT_BUCKETS.iter().map(|(lo, hi)| format!("{lo}-{hi}")).collect();
    header.set("buckets", buckets.join(",")).set(
        "report_format",
        match report_format {
            ReportFormat::Text => "text",
            ReportFormat::Tsv => "tsv",
        },
    );
    let report = EvalReport::build(&pred, &gold, &inv, &DEFAULT_BUCKETS, kbest.as_deref(), &DEFAULT_KS)?;
    emit(a.out.as_deref(), &header, &render_report(&report, report_format))
}

pub fn trace(a: TraceArgs) -> Result<()> {
    let category: Category = a
        .category
        .parse()
        .with_context(|| format!("cannot parse category {:?}", a.category))?;
    let rows = TransitionSystem::default().trace(&category)?;
    let mut body = String::new();
    if a.out.is_some() {
        body.push_str("timestep\tstack\tbuffer\taction\n");
    }
    for row in rows {
        body.push_str(&format!("{row}\n"));
    }
    let mut header = Header::new("trace");
    header.set("category", &category);
    emit(a.out.as_deref(), &header, &body)
}

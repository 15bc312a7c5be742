//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crossner::clustering::{
    read_clusters, train_clusters_from_vocab, write_clusters, ClusterConfig, Clustering,
};
use crossner::corpus::{
    normalize_tag_scheme, read_conll, write_conll_with, ColumnSpec, LabeledCorpus, PlainSentences,
    Separator, TagScheme, VocabularyBuilder, BOUNDARY_SYMBOL,
};
use crossner::crf::{
    read_model, train_crf, write_model, ClusterMaps, CrfModel, FeatureConfig, TrainConfig,
};
use crossner::eval::report::{render_eval_report, render_mcnemar, render_oov_table};
use crossner::eval::{mcnemar, oov_report, score, McNemarUnit};
use crossner::merge::merge_clusterings;
use crossner::Float;

use crate::args::{
    Cli, ClusterArgs, ColumnArgs, Command, EvalArgs, MergeArgs, OovArgs, TagArgs, TrainArgs,
};
use crate::{experiment, CliError};

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Cluster(args) => cmd_cluster(&args),
        Command::Merge(args) => cmd_merge(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Tag(args) => cmd_tag(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::OovReport(args) => cmd_oov(&args),
        Command::Experiment(args) => experiment::cmd_experiment(&args),
    }
}

pub(crate) fn column_spec(args: &ColumnArgs) -> Result<(ColumnSpec, TagScheme), CliError> {
    let separator: Separator = args
        .separator
        .parse()
        .map_err(|e: crossner::Error| CliError::usage(e.to_string()))?;
    let scheme: TagScheme = args
        .scheme
        .parse()
        .map_err(|e: crossner::Error| CliError::usage(e.to_string()))?;
    let spec = ColumnSpec {
        word_col: args.word_col,
        ne_col: args.ne_col,
        pos_col: args.pos_col,
        lemma_col: args.lemma_col,
        chunk_col: args.chunk_col,
        separator,
    };
    spec.validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok((spec, scheme))
}

pub(crate) fn read_labeled(
    path: &Path,
    spec: &ColumnSpec,
    scheme: TagScheme,
) -> Result<LabeledCorpus, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let corpus = read_conll(BufReader::new(file), spec)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let corpus = normalize_tag_scheme(&corpus, scheme)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(corpus)
}

/// Parses an `id=path` flag. Identifiers feed feature namespaces and file
/// names, so they are restricted to word characters plus `.`/`-`.
pub(crate) fn parse_id_path(raw: &str) -> Result<(String, std::path::PathBuf), CliError> {
    let (id, path) = raw
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("expected `id=path`, found `{raw}`")))?;
    validate_id(id)?;
    Ok((id.to_string(), path.into()))
}

pub(crate) fn validate_id(id: &str) -> Result<(), CliError> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "invalid clustering id `{id}` (use letters, digits, `_`, `-`, `.`)"
        )))
    }
}

pub(crate) fn load_clustering(path: &Path) -> Result<Clustering, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut clustering = read_clusters(BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    clustering.language = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(clustering)
}

/// Loads `id=path` clusterings, keeping the flag order.
pub(crate) fn load_clusterings(
    flags: &[String],
) -> Result<(Vec<String>, BTreeMap<String, Clustering>), CliError> {
    let mut order = Vec::new();
    let mut by_id = BTreeMap::new();
    for raw in flags {
        let (id, path) = parse_id_path(raw)?;
        if by_id.contains_key(&id) {
            return Err(CliError::usage(format!("duplicate clustering id `{id}`")));
        }
        let mut clustering = load_clustering(&path)?;
        clustering.language = id.clone();
        order.push(id.clone());
        by_id.insert(id, clustering);
    }
    Ok((order, by_id))
}

pub(crate) fn cluster_maps(by_id: &BTreeMap<String, Clustering>) -> ClusterMaps {
    by_id
        .iter()
        .map(|(id, c)| (id.clone(), c.word_cluster_map()))
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        CliError::Data(format!("{}: {e}", path.display()))
    })?))
}

fn cmd_cluster(args: &ClusterArgs) -> Result<(), CliError> {
    if args.k < 2 {
        return Err(CliError::usage("--k must be at least 2"));
    }
    if args.min_count < 1 {
        return Err(CliError::usage("--min-count must be at least 1"));
    }
    let open = || -> Result<_, CliError> {
        let file = File::open(&args.input)
            .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
        Ok(PlainSentences::new(BufReader::new(file)))
    };

    let mut builder = VocabularyBuilder::new(BOUNDARY_SYMBOL);
    for sentence in open()? {
        builder.count_sentence(&sentence?);
    }
    let mut counter = builder.freeze(args.min_count)?;
    for sentence in open()? {
        counter.observe_sentence(&sentence?);
    }
    let vocab = counter.finish()?;

    if let Some(path) = &args.dump_vocab {
        let mut writer = create(path)?;
        vocab.write_tsv(&mut writer)?;
    }

    let config = ClusterConfig {
        k: args.k,
        min_count: args.min_count,
        max_passes: args.max_passes,
        seed: args.seed,
        suffix_context: args.suffix_context,
    };
    let clustering = train_clusters_from_vocab::<Float>(&vocab, &config)?;
    let mut writer = create(&args.output)?;
    write_clusters(&clustering, &mut writer)?;
    writer.flush()?;
    eprintln!(
        "clustered {} words into {} classes ({} sentences)",
        clustering.len(),
        args.k,
        vocab.n_sentences()
    );
    Ok(())
}

fn cmd_merge(args: &MergeArgs) -> Result<(), CliError> {
    let target = load_clustering(&args.target)?;
    let sources: Vec<Clustering> = args
        .sources
        .iter()
        .map(|p| load_clustering(p))
        .collect::<Result<_, _>>()?;
    let source_refs: Vec<&Clustering> = sources.iter().collect();
    let (merged, report) = merge_clusterings(&target, &source_refs)?;

    let mut writer = create(&args.output)?;
    write_clusters(&merged, &mut writer)?;
    writer.flush()?;
    if let Some(path) = &args.report {
        let mut writer = create(path)?;
        report.write_tsv(&mut writer)?;
        writer.flush()?;
    }
    eprintln!(
        "imported {} words ({} skipped)",
        report.imported.len(),
        report.skipped.len()
    );
    Ok(())
}

/// Applies one `key=value` override to the feature/train configuration.
pub(crate) fn apply_override(
    feature: &mut FeatureConfig,
    train: &mut TrainConfig<Float>,
    raw: &str,
) -> Result<(), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("expected `key=value`, found `{raw}`")))?;
    let bad = || CliError::usage(format!("bad value for `{key}`: `{value}`"));
    let parse_bool = || match value {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(bad()),
    };
    match key {
        "context_window" => feature.context_window = value.parse().map_err(|_| bad())?,
        "cluster_window" => feature.cluster_window = value.parse().map_err(|_| bad())?,
        "use_shape" => feature.use_shape = parse_bool()?,
        "use_prefix_suffix" => feature.use_prefix_suffix = parse_bool()?,
        "use_pos" => feature.use_pos = parse_bool()?,
        "use_lemma" => feature.use_lemma = parse_bool()?,
        "use_bigrams" => feature.use_bigrams = parse_bool()?,
        "l2_sigma" => train.l2_sigma = value.parse().map_err(|_| bad())?,
        "tolerance" => train.tolerance = value.parse().map_err(|_| bad())?,
        "max_iterations" => train.max_iterations = value.parse().map_err(|_| bad())?,
        "history" => train.history = value.parse().map_err(|_| bad())?,
        "seed" => train.seed = value.parse().map_err(|_| bad())?,
        "transition_mask" => train.transition_mask = parse_bool()?,
        _ => return Err(CliError::usage(format!("unknown config key `{key}`"))),
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let (spec, scheme) = column_spec(&args.columns)?;
    let corpus = read_labeled(&args.train, &spec, scheme)?;
    let (order, by_id) = load_clusterings(&args.clusters)?;
    let maps = cluster_maps(&by_id);

    let mut feature = FeatureConfig {
        cluster_sources: order,
        ..FeatureConfig::default()
    };
    let mut train_config = TrainConfig::<Float>::default();
    for raw in &args.config {
        apply_override(&mut feature, &mut train_config, raw)?;
    }

    let model = train_crf(&corpus, &feature, &train_config, &maps)?;
    let mut writer = create(&args.model)?;
    write_model(&model, &mut writer)?;
    writer.flush()?;
    eprintln!(
        "trained on {} sentences: {} labels, {} feature strings",
        corpus.sentences.len(),
        model.labels().len(),
        model.feature_index().num_attributes()
    );
    Ok(())
}

fn cmd_tag(args: &TagArgs) -> Result<(), CliError> {
    let (spec, _) = column_spec(&args.columns)?;
    let file = File::open(&args.model)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.model.display())))?;
    let model: CrfModel<Float> = read_model(BufReader::new(file))?;
    let corpus = {
        let file = File::open(&args.input)
            .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
        read_conll(BufReader::new(file), &spec)?
    };
    let mut predictions: Vec<Vec<String>> = Vec::with_capacity(corpus.sentences.len());
    for sentence in &corpus.sentences {
        predictions.push(model.viterbi_decode(sentence)?);
    }
    let mut writer = create(&args.output)?;
    write_conll_with(&corpus, &mut writer, |si, ti| {
        Some(predictions[si][ti].clone())
    })?;
    writer.flush()?;
    Ok(())
}

/// Reads predictions from a CoNLL-style file: the final column of each row
/// is the label, sentences split on blank lines, `-DOCSTART-` rows dropped.
pub(crate) fn read_predictions(
    path: &Path,
    separator: Separator,
    word_col: usize,
) -> Result<Vec<Vec<String>>, CliError> {
    let file =
        File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let sep = separator.as_char();
    let mut sentences = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut is_docstart = false;
    let mut flush = |current: &mut Vec<String>, is_docstart: &mut bool| {
        if !current.is_empty() && !*is_docstart {
            sentences.push(std::mem::take(current));
        }
        current.clear();
        *is_docstart = false;
    };
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            flush(&mut current, &mut is_docstart);
            continue;
        }
        let fields: Vec<&str> = line.split(sep).collect();
        let label = *fields.last().unwrap();
        if label.is_empty() {
            return Err(CliError::Data(format!(
                "{}: line {}: empty label column",
                path.display(),
                lineno + 1
            )));
        }
        if current.is_empty() && fields.get(word_col) == Some(&"-DOCSTART-") {
            is_docstart = true;
        }
        current.push(label.to_string());
    }
    flush(&mut current, &mut is_docstart);
    Ok(sentences)
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let (spec, scheme) = column_spec(&args.columns)?;
    let unit: McNemarUnit = args
        .mcnemar
        .parse()
        .map_err(|e: crossner::Error| CliError::usage(e.to_string()))?;
    let gold = read_labeled(&args.gold, &spec, scheme)?;
    let pred_a = read_predictions(&args.pred, spec.separator, spec.word_col)?;
    let report_a = score::<Float, _>(&gold, &pred_a)?;

    let mut text = String::new();
    match &args.pred_b {
        None => {
            text.push_str(&render_eval_report(&report_a, None));
        }
        Some(path_b) => {
            let pred_b = read_predictions(path_b, spec.separator, spec.word_col)?;
            let report_b = score::<Float, _>(&gold, &pred_b)?;
            text.push_str(&render_eval_report(&report_a, Some(&report_b)));
            let result = mcnemar::<Float, _>(&gold, &pred_a, &pred_b, unit)?;
            text.push_str(&render_mcnemar(&result, unit.as_str()));
        }
    }
    print!("{text}");
    if let Some(path) = &args.report {
        let mut writer = create(path)?;
        writer.write_all(text.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

fn cmd_oov(args: &OovArgs) -> Result<(), CliError> {
    let (spec, scheme) = column_spec(&args.columns)?;
    let train = read_labeled(&args.train, &spec, scheme)?;
    let test = read_labeled(&args.test, &spec, scheme)?;
    let (_, by_id) = load_clusterings(&args.clusters)?;
    let maps = cluster_maps(&by_id);
    let entries = oov_report(&train, &test, &maps);
    print!("{}", render_oov_table(&entries, args.top));
    Ok(())
}

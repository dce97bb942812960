use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use diachron::align::{apply_alignment, fit_alignment, neighbor_report, AlignmentMap, DEFAULT_ANCHORS};
use diachron::corpus::{bucketize, ingest, load_corpus, read_manifest, save_corpus};
use diachron::embed::train_bucket;
use diachron::lexicon::{builtin_weat_gender_occupations, load_gazetteer, load_religion_map, load_valence_lexicon};
use diachron::metrics::{read_birth_annotations, MentionGranularity, UnitTable};
use diachron::pipeline::{self, write_rows, RunConfig, BUILTIN_GENDER_OCCUPATIONS};
use diachron::weat::{weat_batch, OovPolicy, StdDev, WeatOptions};
use diachron::{BucketRanges, EmbeddingSpace, Gazetteer, Preprocessing, SgnsConfig, ValenceLexicon, WeatSpec};

#[derive(Parser)]
#[command(name = "diachron", version, about = "Bias measurement over time-bucketed subtitle corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Mpr,
    Mbr,
    Mentions,
    Surnames,
    Religion,
    Amounts,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the subtitle files of a manifest and store them bucketed.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// JSON map of bucket name to [start, end]; old/mid/new by default.
        #[arg(long)]
        ranges: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute one count-based metric over a stored corpus.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long)]
        bucket: Option<String>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "film")]
        granularity: Granularity,
        #[arg(long)]
        religion_map: Option<PathBuf>,
        #[arg(long)]
        births: Option<PathBuf>,
        /// Text samples, one per line (for `--metric amounts`).
        #[arg(long)]
        samples: Option<PathBuf>,
        /// CSV destination; `<metric>.csv` by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train skip-gram embeddings for one bucket.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        bucket: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        lr: f64,
        #[arg(long, default_value_t = 5)]
        min_count: u64,
        #[arg(long, default_value_t = 1e-5)]
        subsample: f64,
        #[arg(long, default_value_t = 1, env = "DIACHRON_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Fit a rotation from one space into another.
    Align {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ANCHORS)]
        anchors: usize,
        /// Skip length normalization and centering of anchors.
        #[arg(long)]
        raw: bool,
        /// Where to write the map as JSON.
        #[arg(long)]
        out: PathBuf,
        /// Also write the rotated source space here.
        #[arg(long)]
        aligned: Option<PathBuf>,
    },
    /// Nearest neighbors of a word in one or more aligned spaces.
    Neighbors {
        #[arg(long)]
        token: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long = "space")]
        spaces: Vec<PathBuf>,
        /// Use every `.vec` file in `--dir`.
        #[arg(long)]
        all_buckets: bool,
        #[arg(long, default_value = "out/embeddings/aligned")]
        dir: PathBuf,
        /// Comma-separated bucket order for `--all-buckets`; file-name order otherwise.
        #[arg(long, value_delimiter = ',')]
        order: Vec<String>,
        /// Valence lexicon CSV; the bundled test lexicon by default.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// WEAT effect size of one or more spaces.
    Weat {
        #[arg(long, conflicts_with = "spec")]
        builtin: Option<String>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long = "space", required = true)]
        spaces: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "drop-and-rebalance")]
        oov_policy: Oov,
        /// Sample instead of population standard deviation.
        #[arg(long)]
        sample_std: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline from a TOML config.
    #[command(alias = "run")]
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Granularity {
    Film,
    Token,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oov {
    Error,
    DropAndRebalance,
}

enum Failure {
    Usage(String),
    Analysis(String),
}

type Outcome = Result<(), Failure>;

fn analysis<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Analysis(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_space(path: &Path) -> Result<EmbeddingSpace, Failure> {
    EmbeddingSpace::load_text(path).map_err(|e| analysis(format!("{}: {e}", path.display())))
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Outcome {
    write_rows(path, rows).map_err(analysis)?;
    let text = std::fs::read_to_string(path).map_err(analysis)?;
    print!("{text}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn stats(
    corpus: &Path,
    metric: Metric,
    bucket: Option<String>,
    gazetteer: Option<PathBuf>,
    granularity: Granularity,
    religion_map: Option<PathBuf>,
    births: Option<PathBuf>,
    samples: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Outcome {
    let name = match metric {
        Metric::Mpr => "mpr",
        Metric::Mbr => "mbr",
        Metric::Mentions => "mentions",
        Metric::Surnames => "surnames",
        Metric::Religion => "religion",
        Metric::Amounts => "amounts",
    };
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    if let Metric::Amounts = metric {
        let path = samples.ok_or_else(|| usage("--metric amounts needs --samples"))?;
        let text = std::fs::read_to_string(&path).map_err(analysis)?;
        let lines: Vec<String> = text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect();
        return write_csv(&out, &pipeline::amount_rows(&lines, &UnitTable::default()));
    }
    let mut corpus = load_corpus(corpus).map_err(analysis)?;
    if let Some(b) = &bucket {
        if corpus.ranges().get(b).is_none() {
            let known: Vec<&str> = corpus.ranges().names().collect();
            return Err(usage(format!("unknown bucket {b:?}; known: {}", known.join(", "))));
        }
        let keep = corpus.ranges().get(b).cloned().expect("checked");
        corpus = corpus.filter(|d| keep.contains(d.year));
    }
    let only = |rb: &str| bucket.as_deref().is_none_or(|b| b == rb);
    match metric {
        Metric::Mpr => {
            let rows: Vec<_> = pipeline::mpr_rows(&corpus).into_iter().filter(|r| only(&r.bucket)).collect();
            write_csv(&out, &rows)
        }
        Metric::Mbr => {
            let annotations = match births {
                Some(p) => Some(read_birth_annotations(std::fs::File::open(p).map_err(usage)?).map_err(analysis)?),
                None => None,
            };
            let (_, rows) = pipeline::mbr_rows(&corpus, annotations.as_ref());
            let rows: Vec<_> = rows.into_iter().filter(|r| only(&r.bucket)).collect();
            write_csv(&out, &rows)
        }
        Metric::Mentions => {
            let g = match gazetteer {
                Some(p) => load_gazetteer(&p).map_err(analysis)?,
                None => Gazetteer::bundled_india(),
            };
            let granularity = match granularity {
                Granularity::Film => MentionGranularity::Film,
                Granularity::Token => MentionGranularity::Token,
            };
            let rows: Vec<_> = pipeline::mention_rows(&corpus, &g, granularity)
                .into_iter()
                .filter(|r| only(&r.bucket))
                .collect();
            write_csv(&out, &rows)
        }
        Metric::Surnames => {
            let rows: Vec<_> = pipeline::surname_rows(&corpus).into_iter().filter(|r| only(&r.bucket)).collect();
            write_csv(&out, &rows)
        }
        Metric::Religion => {
            let p = religion_map.ok_or_else(|| usage("--metric religion needs --religion-map"))?;
            let map = load_religion_map(&p).map_err(analysis)?;
            let (rows, empty) = pipeline::religion_rows(&corpus, &map);
            for b in empty.iter().filter(|b| only(b)) {
                eprintln!("warning: no mapped surnames in bucket {b}");
            }
            let rows: Vec<_> = rows.into_iter().filter(|r| only(&r.bucket)).collect();
            write_csv(&out, &rows)
        }
        Metric::Amounts => unreachable!("handled above"),
    }
}

#[allow(clippy::too_many_arguments)]
fn neighbors(
    token: String,
    n: usize,
    spaces: Vec<PathBuf>,
    all_buckets: bool,
    dir: PathBuf,
    order: Vec<String>,
    lexicon: Option<PathBuf>,
    json: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Outcome {
    let mut paths = spaces;
    if all_buckets {
        let mut found: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| usage(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "vec"))
            .collect();
        found.sort();
        if !order.is_empty() {
            let rank = |p: &PathBuf| {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
                order.iter().position(|o| o == stem).unwrap_or(usize::MAX)
            };
            found.sort_by_key(rank);
        }
        paths.extend(found);
    }
    if paths.is_empty() {
        return Err(usage("give --space at least once or use --all-buckets"));
    }
    let spaces = paths.iter().map(|p| load_space(p)).collect::<Result<Vec<_>, _>>()?;
    let lexicon = match lexicon {
        Some(p) => load_valence_lexicon(&p).map_err(analysis)?.lexicon,
        None => ValenceLexicon::bundled_test(),
    };
    let report = neighbor_report(&spaces, &token, n).map_err(analysis)?.with_valence(&lexicon);
    for b in &report.missing_buckets {
        eprintln!("warning: {token:?} is not in bucket {b}");
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(analysis)?;
    if let Some(out) = out {
        std::fs::write(out, &buf).map_err(analysis)?;
    }
    print!("{}", String::from_utf8_lossy(&buf));
    if let Some(json) = json {
        std::fs::write(json, report.to_json().map_err(analysis)?).map_err(analysis)?;
    }
    if report.buckets.is_empty() {
        return Err(analysis(format!("{token:?} is in none of the spaces")));
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Ingest { manifest, ranges, out } => {
            let ranges = match ranges {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(usage)?;
                    serde_json::from_str::<BucketRanges>(&text).map_err(usage)?
                }
                None => BucketRanges::default(),
            };
            if !manifest.is_file() {
                return Err(usage(format!("manifest {} does not exist", manifest.display())));
            }
            let entries = read_manifest(&manifest).map_err(analysis)?;
            let corpus = bucketize(ingest(&entries).map_err(analysis)?, &ranges).map_err(analysis)?;
            save_corpus(&corpus, &out).map_err(analysis)?;
            for (name, docs) in corpus.buckets() {
                println!("{name}\t{} documents", docs.len());
            }
            if !corpus.unassigned().is_empty() {
                println!("unassigned\t{} documents", corpus.unassigned().len());
            }
            Ok(())
        }
        Command::Stats {
            corpus,
            metric,
            bucket,
            gazetteer,
            granularity,
            religion_map,
            births,
            samples,
            out,
        } => stats(&corpus, metric, bucket, gazetteer, granularity, religion_map, births, samples, out),
        Command::Train {
            corpus,
            bucket,
            out,
            dim,
            window,
            negatives,
            epochs,
            lr,
            min_count,
            subsample,
            seed,
            threads,
        } => {
            let config = SgnsConfig {
                dim,
                window,
                negatives,
                epochs,
                initial_lr: lr,
                min_count,
                subsample_t: subsample,
                seed,
                threads,
            };
            config.validate().map_err(usage)?;
            let corpus = load_corpus(&corpus).map_err(analysis)?;
            if corpus.ranges().get(&bucket).is_none() {
                return Err(usage(format!("unknown bucket {bucket:?}")));
            }
            let space = train_bucket(&bucket, corpus.bucket(&bucket), &config).map_err(analysis)?;
            space.save_text(&out).map_err(analysis)?;
            if let Some(p) = space.provenance() {
                for (i, l) in p.epoch_losses.iter().enumerate() {
                    println!("epoch {}\tloss {l:.6}", i + 1);
                }
            }
            println!("{} tokens x {} dims -> {}", space.len(), space.dim(), out.display());
            Ok(())
        }
        Command::Align {
            source,
            target,
            anchors,
            raw,
            out,
            aligned,
        } => {
            let (s, t) = (load_space(&source)?, load_space(&target)?);
            let mode = if raw { Preprocessing::Raw } else { Preprocessing::NormalizeCenter };
            let map: AlignmentMap = fit_alignment(&s, &t, anchors, mode).map_err(analysis)?;
            std::fs::write(&out, map.to_json().map_err(analysis)?).map_err(analysis)?;
            if map.rank_deficient {
                eprintln!("warning: anchor matrix is rank deficient");
            }
            println!(
                "{} -> {}: {} anchors, residual {:.6} (identity {:.6})",
                map.source_bucket,
                map.target_bucket,
                map.anchor_tokens.len(),
                map.residual,
                map.identity_residual
            );
            if let Some(p) = aligned {
                apply_alignment(&s, &map).map_err(analysis)?.save_text(&p).map_err(analysis)?;
            }
            Ok(())
        }
        Command::Neighbors {
            token,
            n,
            spaces,
            all_buckets,
            dir,
            order,
            lexicon,
            json,
            out,
        } => neighbors(token, n, spaces, all_buckets, dir, order, lexicon, json, out),
        Command::Weat {
            builtin,
            spec,
            spaces,
            oov_policy,
            sample_std,
            out,
        } => {
            let spec = match (builtin, spec) {
                (Some(b), _) if b == BUILTIN_GENDER_OCCUPATIONS => builtin_weat_gender_occupations(),
                (Some(b), _) => return Err(usage(format!("unknown builtin {b:?}"))),
                (None, Some(p)) => WeatSpec::load(&p).map_err(usage)?,
                (None, None) => return Err(usage("give --builtin or --spec")),
            };
            let options = WeatOptions {
                oov_policy: match oov_policy {
                    Oov::Error => OovPolicy::Error,
                    Oov::DropAndRebalance => OovPolicy::DropAndRebalance,
                },
                std_dev: if sample_std { StdDev::Sample } else { StdDev::Population },
            };
            let loaded = spaces.iter().map(|p| load_space(p)).collect::<Result<Vec<_>, _>>()?;
            let labels: Vec<String> = spaces.iter().map(|p| p.display().to_string()).collect();
            let labeled: Vec<(&str, &EmbeddingSpace)> = labels.iter().map(String::as_str).zip(&loaded).collect();
            let batch = weat_batch(&labeled, &spec, options);
            for r in &batch.rows {
                match &r.outcome {
                    Ok(res) => {
                        println!("{}\t{}\t{:.6}", r.space, r.bucket, res.effect_size);
                        if !res.dropped_tokens.is_empty() {
                            eprintln!("dropped: {}", res.dropped_summary());
                        }
                    }
                    Err(e) => println!("{}\t{}\tfailed: {e}", r.space, r.bucket),
                }
            }
            if batch.rows.len() > 1 {
                if let Some(m) = batch.mean_effect_size {
                    println!("mean\t\t{m:.6}");
                }
            }
            if let Some(out) = out {
                let file = std::fs::File::create(out).map_err(analysis)?;
                batch.write_csv(file).map_err(analysis)?;
            }
            if batch.mean_effect_size.is_none() {
                return Err(analysis("no space produced an effect size"));
            }
            Ok(())
        }
        Command::Report { config } => {
            let config = RunConfig::load(&config).map_err(usage)?;
            match pipeline::run_pipeline(&config) {
                Ok(report) => {
                    for w in &report.warnings {
                        eprintln!("warning: {w}");
                    }
                    for o in &report.outputs {
                        println!("{o}");
                    }
                    Ok(())
                }
                Err(e) if e.exit_code() == 2 => Err(usage(e)),
                Err(e) => Err(analysis(e)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Analysis(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use storystream::encoder::build_encoder;
use storystream::ingest::load_articles;
use storystream::tokenize::Stopwords;
use storystream::{Engine, RunConfig};

use crate::RunArgs;

#[derive(Serialize)]
struct SlideTiming {
    pane: i64,
    arrivals: usize,
    live_stories: usize,
    wall_ms: f64,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    config: &'a RunConfig,
    seed: u64,
    articles: usize,
    slides: usize,
    new_stories: usize,
    expired_stories: usize,
    total_wall_ms: f64,
    slide_timings: &'a [SlideTiming],
    truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub const STORIES_FILE: &str = "stories.jsonl";
pub const EXPIRED_FILE: &str = "expired.jsonl";
pub const META_FILE: &str = "run_meta.json";
pub const TIMINGS_FILE: &str = "slide_timings.csv";

fn load_stopwords(config: &RunConfig) -> anyhow::Result<Stopwords> {
    match &config.tokenize.stopwords_path {
        Some(path) => Stopwords::from_file(path).with_context(|| format!("cannot read stopwords {}", path.display())),
        None => Ok(Stopwords::english()),
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn run(args: &RunArgs) -> anyhow::Result<()> {
    let config = args.overrides.resolve()?;
    let stopwords = load_stopwords(&config)?;
    let articles = load_articles(&args.input, config.window.slide_seconds, &stopwords)?;
    let encoder = build_encoder(&config.encoder, stopwords)?;
    let mut engine = Engine::new(config.window.clone(), config.sim.clone(), encoder)?;
    engine.set_poison_assigned(args.poison_assigned);

    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let mut stories = create(&args.out_dir, STORIES_FILE)?;
    let mut expired = create(&args.out_dir, EXPIRED_FILE)?;

    let n_articles = articles.len();
    let mut timings = Vec::new();
    let (mut new_stories, mut expired_count) = (0, 0);
    let started = Instant::now();
    let mut slide_start = Instant::now();
    let outcome = engine.run_stream_with(articles, |report, records| {
        timings.push(SlideTiming {
            pane: report.pane,
            arrivals: report.arrivals.len(),
            live_stories: report.live_story_sizes.len(),
            wall_ms: slide_start.elapsed().as_secs_f64() * 1e3,
        });
        new_stories += report.new_stories.len();
        expired_count += records.len();
        serde_json::to_writer(&mut stories, report).map_err(std::io::Error::from)?;
        stories.write_all(b"\n")?;
        for r in &records {
            serde_json::to_writer(&mut expired, r).map_err(std::io::Error::from)?;
            expired.write_all(b"\n")?;
        }
        slide_start = Instant::now();
        Ok(())
    });
    let total_wall_ms = started.elapsed().as_secs_f64() * 1e3;

    let error = outcome.as_ref().err().map(|e| e.to_string());
    if let Some(message) = &error {
        let marker = serde_json::json!({ "truncated": true, "error": message });
        writeln!(stories, "{marker}")?;
    }
    stories.flush()?;
    expired.flush()?;

    let meta = RunMeta {
        config: &config,
        seed: config.window.rng_seed,
        articles: n_articles,
        slides: timings.len(),
        new_stories,
        expired_stories: expired_count,
        total_wall_ms,
        slide_timings: &timings,
        truncated: error.is_some(),
        error,
    };
    let mut meta_out = create(&args.out_dir, META_FILE)?;
    serde_json::to_writer_pretty(&mut meta_out, &meta)?;
    meta_out.write_all(b"\n")?;
    meta_out.flush()?;

    let mut csv = create(&args.out_dir, TIMINGS_FILE)?;
    writeln!(csv, "pane,arrivals,live_stories,wall_ms")?;
    for t in &timings {
        writeln!(csv, "{},{},{},{:.3}", t.pane, t.arrivals, t.live_stories, t.wall_ms)?;
    }
    csv.flush()?;

    outcome?;
    eprintln!(
        "{} articles, {} slides, {} stories discovered, {} expired",
        n_articles,
        timings.len(),
        new_stories,
        expired_count
    );
    Ok(())
}

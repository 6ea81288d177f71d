use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use storystream::config::SimOptions;
use storystream::encoder::HashedEncoder;
use storystream::ingest::records_to_articles;
use storystream::model::Article;
use storystream::synthetic::{generate, SyntheticSpec};
use storystream::tokenize::Stopwords;
use storystream::{Engine, PaneIndex, WindowConfig};

use crate::BenchArgs;

#[derive(Debug, Serialize)]
pub struct BenchRow {
    /// Requested in-window article count.
    pub size: usize,
    pub articles_per_pane: usize,
    /// Median wall time of the timed slides, in milliseconds.
    pub median_slide_ms: f64,
    /// Median ratio to the previous size, if any.
    pub ratio_to_previous: Option<f64>,
    /// Largest number of pane summaries any story held during the run.
    pub max_panes_per_story: usize,
    pub live_stories: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn measure(args: &BenchArgs, size: usize) -> anyhow::Result<BenchRow> {
    let window = args.window_slides.max(1) as usize;
    let per_story = (size as f64 / (window * args.stories) as f64).round().max(1.0) as usize;
    let spec = SyntheticSpec {
        stories: args.stories,
        articles_per_story_per_pane: per_story,
        panes: window + args.measure_slides,
        seed: args.seed,
        ..SyntheticSpec::default()
    };
    let records = generate(&spec)?;
    let numbered: Vec<_> = records.into_iter().enumerate().collect();
    let config = WindowConfig {
        window_slides: args.window_slides,
        // One story-day of articles starts a story.
        min_story_size: per_story,
        encoder_dim: args.encoder_dim,
        rng_seed: args.seed,
        ..WindowConfig::default()
    };
    let articles = records_to_articles(&numbered, config.slide_seconds, &Stopwords::english())?;
    let mut by_pane: Vec<(PaneIndex, Vec<Article>)> = Vec::new();
    for a in articles {
        match by_pane.last_mut() {
            Some((p, batch)) if *p == a.pane() => batch.push(a),
            _ => by_pane.push((a.pane(), vec![a])),
        }
    }

    let encoder = HashedEncoder::new(args.encoder_dim, 42);
    let mut engine = Engine::new(config, SimOptions::default(), Box::new(encoder))?;
    let mut timed = Vec::new();
    let mut max_panes = 0;
    for (i, (pane, batch)) in by_pane.into_iter().enumerate() {
        let started = Instant::now();
        engine.process_slide(pane, batch).with_context(|| format!("bench size {size}"))?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        if i >= window {
            timed.push(ms);
        }
        let panes = engine.state().stories.values().map(|s| s.pss.pane_count()).max().unwrap_or(0);
        max_panes = max_panes.max(panes);
    }
    Ok(BenchRow {
        size,
        articles_per_pane: per_story * args.stories,
        median_slide_ms: median(timed),
        ratio_to_previous: None,
        max_panes_per_story: max_panes,
        live_stories: engine.state().stories.len(),
    })
}

pub fn bench(args: &BenchArgs) -> anyhow::Result<()> {
    anyhow::ensure!(args.measure_slides > 0, "measure-slides must be positive");
    anyhow::ensure!(args.stories > 0, "stories must be positive");
    let mut rows: Vec<BenchRow> = Vec::new();
    for &size in &args.sizes {
        let mut row = measure(args, size)?;
        row.ratio_to_previous = rows.last().map(|prev| row.median_slide_ms / prev.median_slide_ms);
        rows.push(row);
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        println!("{:>8} {:>10} {:>12} {:>7} {:>10} {:>8}", "size", "per_pane", "median_ms", "ratio", "max_panes", "stories");
        for r in &rows {
            let ratio = r.ratio_to_previous.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
            println!(
                "{:>8} {:>10} {:>12.2} {:>7} {:>10} {:>8}",
                r.size, r.articles_per_pane, r.median_slide_ms, ratio, r.max_panes_per_story, r.live_stories
            );
        }
    }
    Ok(())
}

#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use qgbench_core::corpus::{write_quads, QuadRecord};
use qgbench_core::fixtures::synthetic;
use qgbench_core::generation::{write_run, GenParams, Generator, MockAdapter};
use qgbench_core::promptkit::{InputStyle, PromptSetting};
use qgbench_harness::config::ServerConfig;
use qgbench_harness::service::{router, AppState, Catalog};
use qgbench_harness::store::RatingLog;
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub corpus: PathBuf,
    pub runs: PathBuf,
    pub ratings: PathBuf,
    pub records: Vec<QuadRecord>,
}

impl Fixture {
    /// `n` synthetic records and one mock run per listed setting.
    pub fn new(n: usize, settings: &[PromptSetting]) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let records = synthetic(n);
        let corpus = dir.path().join("corpus.ndjson");
        write_quads(std::fs::File::create(&corpus).unwrap(), &records).unwrap();
        let runs = dir.path().join("runs");
        let adapter = MockAdapter::default();
        for setting in settings {
            let run = Generator::new(&adapter)
                .run_batch(&records, *setting, InputStyle::Instruction, &GenParams::chat(), 4)
                .unwrap();
            write_run(&run, &runs, None, None).unwrap();
        }
        let ratings = dir.path().join("ratings.ndjson");
        Self { dir, corpus, runs, ratings, records }
    }

    pub fn server_config(&self) -> ServerConfig {
        ServerConfig {
            corpus: self.corpus.clone(),
            runs_dir: self.runs.clone(),
            ratings_file: self.ratings.clone(),
            port: 0,
            ..ServerConfig::default()
        }
    }

    pub fn state(&self, config: &ServerConfig) -> Arc<AppState> {
        let catalog = Catalog::load(&config.corpus, &config.runs_dir).unwrap();
        let log = RatingLog::open(&config.ratings_file).unwrap();
        Arc::new(AppState::new(catalog, log, config))
    }
}

/// Serves `state` on an ephemeral port in the current runtime.
pub async fn spawn(state: Arc<AppState>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router(state)).await.unwrap();
    });
    format!("http://{addr}")
}

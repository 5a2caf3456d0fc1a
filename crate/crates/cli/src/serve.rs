use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use ardent_core::persist::ParticleSetDocument;
use ardent_service::{serve, ServiceConfig, SessionStore, TaskBundle};
use clap::Args;

use crate::error::CliError;
use crate::FilterArgs;

#[derive(Clone, Debug, Args)]
pub struct ServeArgs {
    /// Task bundle directory; repeat for several bundles. The first is the default.
    #[arg(long, required = true)]
    pub bundle: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Seeds arm assignment and session ids.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for per-session JSONL logs.
    #[arg(long, default_value = "sessions")]
    pub log_dir: PathBuf,
    /// Initial particles for ardent sessions.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
}

pub fn run(args: ServeArgs) -> Result<(), CliError> {
    let mut bundles = Vec::with_capacity(args.bundle.len());
    for dir in &args.bundle {
        if !dir.is_dir() {
            return Err(CliError::input(dir, "bundle directory not found"));
        }
        bundles.push(TaskBundle::load(dir).map_err(|e| CliError::input(dir, e))?);
    }
    let warm_start = match &args.warm_start {
        None => None,
        Some(path) => {
            let doc = ParticleSetDocument::load(path).map_err(|e| CliError::input(path, e))?;
            for b in &bundles {
                let dims = b.bundle.dims()?;
                if doc.dims != dims {
                    return Err(CliError::input(
                        path,
                        format!("particle dims {:?} do not match bundle {:?} {:?}", doc.dims, b.bundle.id, dims),
                    ));
                }
            }
            Some(doc.particles().map_err(|e| CliError::input(path, e))?)
        }
    };
    let mut filter = args.filter.config();
    if let Some(ps) = &warm_start {
        filter.n_particles = ps.n_particles();
    }
    let config = ServiceConfig {
        seed: args.seed,
        filter,
        log_dir: Some(args.log_dir.clone()),
        warm_start,
    };
    let store = Arc::new(SessionStore::new(bundles, config)?);
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::io("tokio runtime"))?;
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(serve(addr, store))
        .map_err(CliError::io(addr.to_string()))
}

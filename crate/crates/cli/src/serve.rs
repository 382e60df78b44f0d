//! `morse serve`: the control service over a set of named archives.

use std::path::{Path, PathBuf};

use morse::store::ParetoArchive;
use morse_service::AppState;

use crate::args::ServeArgs;
use crate::error::CliError;

/// Splits `NAME=PATH`; a bare path is named after its file stem.
pub fn parse_archive_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let name = Path::new(arg)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| arg.to_string());
            (name, path)
        }
    }
}

pub fn load_archives(args: &[String]) -> Result<Vec<(String, ParetoArchive)>, CliError> {
    let mut out: Vec<(String, ParetoArchive)> = Vec::new();
    for arg in args {
        let (name, path) = parse_archive_arg(arg);
        if out.iter().any(|(n, _)| *n == name) {
            return Err(CliError::Usage(format!("archive name {name:?} given twice")));
        }
        out.push((name, ParetoArchive::load(&path)?));
    }
    Ok(out)
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let state = AppState::new(load_archives(&args.archives)?);
    let addr = format!("{}:{}", args.host, args.port);
    let io_err = |source| CliError::Io { path: PathBuf::from(&addr), source };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io_err)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(io_err)?;
        let local = listener.local_addr().map_err(io_err)?;
        println!("listening on http://{local}");
        morse_service::serve(state, listener).await.map_err(io_err)
    })
}

//! Live operator sessions over a Pareto archive, served as HTTP+JSON with a
//! server-sent event stream.

pub mod api;
pub mod session;

pub use api::{router, AppState};
pub use session::{replay, Command, LoggedEntry, Session, SessionError, SessionOptions};

/// Serves on `listener` until the process receives Ctrl-C.
pub async fn serve(state: std::sync::Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

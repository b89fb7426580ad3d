//! HTTP case-management API over the mammoseg pipeline.
//!
//! A case holds one patient record, the uploaded image, the stages produced
//! by the steps the client has run, the measurement and the last report.
//! Every computation is delegated to `mammoseg-core`.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/cases` | create from a patient record |
//! | GET | `/cases` | list |
//! | GET | `/cases/{id}` | summary and stage list |
//! | POST | `/cases/{id}/image` | PGM body |
//! | POST | `/cases/{id}/steps/{step}` | run a step, or `pipeline` for the default order |
//! | GET | `/cases/{id}/stages/{name}` | stage raster as PGM |
//! | GET | `/cases/{id}/histogram` | 256 counts, `?stage=` optional |
//! | POST / GET | `/cases/{id}/measurement` | set or read the diameter |
//! | GET | `/cases/{id}/report` | `?generate=true` makes a new one |
//!
//! Errors carry `{error_code, message, field?}`.

pub mod error;
pub mod routes;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;

pub use error::ApiError;
pub use routes::AppState;
pub use store::CaseStore;

/// Upload limit; large enough for full-field mammograms at 8 bits.
pub const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;

pub fn router(store: Arc<CaseStore>) -> Router {
    Router::new()
        .route("/cases", post(routes::create_case).get(routes::list_cases))
        .route("/cases/{id}", get(routes::get_case))
        .route("/cases/{id}/image", post(routes::upload_image))
        .route("/cases/{id}/steps/{step}", post(routes::run_step))
        .route("/cases/{id}/stages/{name}", get(routes::get_stage))
        .route("/cases/{id}/histogram", get(routes::get_histogram))
        .route("/cases/{id}/measurement", post(routes::set_measurement).get(routes::get_measurement))
        .route("/cases/{id}/report", get(routes::get_report))
        .fallback(routes::fallback)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(store)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, store: Arc<CaseStore>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

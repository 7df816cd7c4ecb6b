//! HTTP JSON front end for `milestone-core`, backed by an append-only file
//! store.
//!
//! Plans are versioned. Every write names the version it was based on and
//! fails with `409 Conflict` if that is no longer the latest, so several
//! people can edit the same plan without locks. What-if sessions hold a
//! private working copy of one version until they are committed or
//! discarded.

pub mod api;
pub mod ops;
pub mod store;

use std::net::SocketAddr;

pub use api::{router, AppState};
pub use ops::{apply, Op, OpError};
pub use store::{PlanStore, StoreError, Version};

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr, store: PlanStore) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(store))).await
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
struct ServiceChapter;

//! axum wiring around [`Gateway`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::config::ServerConfig;
use crate::handler::{Body, Gateway, Reply};

pub const ENDPOINT: &str = "/ei/server";

pub fn router(gateway: Arc<Gateway>, config: &ServerConfig) -> Router {
    let mut router = Router::new()
        .route(ENDPOINT, post(command))
        .route("/ei/server/download/:execid/:filename", get(download))
        .layer(DefaultBodyLimit::max(config.max_request_bytes))
        .with_state(gateway);
    if !config.cors_origins.is_empty() {
        let origins: Vec<HeaderValue> = config
            .cors_origins
            .iter()
            .filter_map(|o| match HeaderValue::from_str(o) {
                Ok(v) => Some(v),
                Err(_) => {
                    tracing::warn!(origin = %o, "ignoring unusable CORS origin");
                    None
                }
            })
            .collect();
        router = router.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE])
                .allow_credentials(true),
        );
    }
    if let Some(dir) = &config.static_dir {
        router = router.fallback_service(ServeDir::new(dir));
    }
    router
}

async fn command(State(gateway): State<Arc<Gateway>>, headers: HeaderMap, body: Bytes) -> Response {
    let cookie = headers.get(header::COOKIE).and_then(|v| v.to_str().ok()).map(str::to_owned);
    let reply = tokio::task::spawn_blocking(move || gateway.handle(&body, cookie.as_deref())).await;
    match reply {
        Ok(reply) => into_response(reply),
        Err(e) => {
            tracing::error!(error = %e, "request handler panicked");
            StatusCode::INTERNAL_SERVER_ERROR.into_response()
        }
    }
}

async fn download(
    State(gateway): State<Arc<Gateway>>,
    Path((execid, filename)): Path<(String, String)>,
) -> Response {
    match tokio::task::spawn_blocking(move || gateway.download(&execid, &filename)).await {
        Ok(reply) => into_response(reply),
        Err(_) => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}

fn into_response(reply: Reply) -> Response {
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut response = match reply.body {
        Body::Json(value) => (status, axum::Json(value)).into_response(),
        Body::File { bytes, media_type, filename } => {
            let disposition = format!("attachment; filename=\"{}\"", filename.replace(['"', '\\'], "_"));
            let mut r = (status, bytes).into_response();
            let h = r.headers_mut();
            if let Ok(v) = HeaderValue::from_str(&media_type) {
                h.insert(header::CONTENT_TYPE, v);
            }
            if let Ok(v) = HeaderValue::from_str(&disposition) {
                h.insert(header::CONTENT_DISPOSITION, v);
            }
            r
        }
    };
    if let Some(cookie) = reply.set_cookie.and_then(|c| HeaderValue::from_str(&c).ok()) {
        response.headers_mut().insert(header::SET_COOKIE, cookie);
    }
    response
}

/// Serve until ctrl-c or SIGTERM, reaping old executions and reloading the
/// registry on SIGHUP.
pub async fn serve(listener: TcpListener, gateway: Arc<Gateway>, config: &ServerConfig) -> std::io::Result<()> {
    spawn_reaper(Arc::clone(&gateway), config);
    spawn_reloader(Arc::clone(&gateway))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(gateway, config)).with_graceful_shutdown(shutdown()).await
}

fn spawn_reaper(gateway: Arc<Gateway>, config: &ServerConfig) {
    let (interval, ttl) = (config.reap_interval, config.record_ttl);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(interval);
        tick.tick().await;
        loop {
            tick.tick().await;
            let g = Arc::clone(&gateway);
            if let Ok(n) = tokio::task::spawn_blocking(move || g.engine().reap_expired(ttl)).await {
                if n > 0 {
                    tracing::info!(reaped = n, "removed expired executions");
                }
            }
        }
    });
}

fn spawn_reloader(gateway: Arc<Gateway>) -> std::io::Result<()> {
    use tokio::signal::unix::{signal, SignalKind};
    let mut hup = signal(SignalKind::hangup())?;
    tokio::spawn(async move {
        while hup.recv().await.is_some() {
            let g = Arc::clone(&gateway);
            match tokio::task::spawn_blocking(move || g.reload()).await {
                Ok(Ok(())) => tracing::info!("registry reloaded"),
                Ok(Err(e)) => tracing::error!(error = %e, "reload failed, keeping the old registry"),
                Err(_) => tracing::error!("reload panicked"),
            }
        }
    });
    Ok(())
}

async fn shutdown() {
    use tokio::signal::unix::{signal, SignalKind};
    let mut term = match signal(SignalKind::terminate()) {
        Ok(s) => s,
        Err(_) => return std::future::pending().await,
    };
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = term.recv() => {}
    }
    tracing::info!("shutting down");
}

/// A gateway served on its own runtime thread, for embedding and tests.
/// Dropping it stops the server.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(gateway: Arc<Gateway>, config: &ServerConfig) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let listener = runtime.block_on(TcpListener::bind(config.listen))?;
        let addr = listener.local_addr()?;
        let app = router(gateway, config);
        let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = stopped.await;
                    })
                    .await;
            });
        });
        Ok(BackgroundServer { addr, stop: Some(stop), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://addr/ei/server`
    pub fn endpoint(&self) -> String {
        format!("http://{}{ENDPOINT}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

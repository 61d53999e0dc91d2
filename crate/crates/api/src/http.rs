//! axum front end over [`Service::dispatch`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::http::{header, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;

use crate::{Service, REQUEST_ID_HEADER};

/// Every request goes to the service; `base_path` (e.g. `/api`) is stripped first.
pub fn router(service: Arc<Service>, base_path: &str) -> Router {
    let base = Arc::<str>::from(base_path.trim_end_matches('/'));
    Router::new()
        .fallback(move |method: Method, uri: Uri, body: Bytes| handle(service.clone(), base.clone(), method, uri, body))
}

async fn handle(service: Arc<Service>, base: Arc<str>, method: Method, uri: Uri, body: Bytes) -> Response {
    let target = uri.path_and_query().map_or(uri.path(), |pq| pq.as_str());
    let Some(target) = target.strip_prefix(&*base).map(str::to_owned) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let reply = tokio::task::spawn_blocking(move || service.dispatch(method.as_str(), &target, &body)).await;
    let reply = match reply {
        Ok(r) => r,
        Err(e) => {
            tracing::error!("dispatch panicked: {e}");
            return StatusCode::INTERNAL_SERVER_ERROR.into_response();
        }
    };
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut response = (status, [(header::CONTENT_TYPE, reply.content_type)], reply.body).into_response();
    if let Some(id) = reply.request_id.and_then(|id| HeaderValue::from_str(&id).ok()) {
        response.headers_mut().insert(REQUEST_ID_HEADER, id);
    }
    response
}

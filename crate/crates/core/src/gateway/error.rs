use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::ledger::{ContractError, LedgerError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            http_status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl From<LedgerError> for ApiError {
    fn from(e: LedgerError) -> Self {
        let msg = e.to_string();
        let (status, code) = match &e {
            LedgerError::Rejected(c) => match c {
                ContractError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
                ContractError::Duplicate(_) => (StatusCode::CONFLICT, "duplicate"),
                ContractError::Invalid(_) => (StatusCode::BAD_REQUEST, "invalid"),
                ContractError::NoEligibleServer(_) => (StatusCode::NOT_FOUND, "no_eligible_server"),
            },
            LedgerError::UnknownContract(_) | LedgerError::UnknownOperation { .. } => {
                (StatusCode::BAD_REQUEST, "unknown_operation")
            }
            LedgerError::NotReadOnly { .. } | LedgerError::ReadOnlyViolation { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "read_only_violation")
            }
            LedgerError::Io(_) | LedgerError::Corrupt(_) | LedgerError::Unavailable(_) => {
                (StatusCode::SERVICE_UNAVAILABLE, "ledger_unavailable")
            }
        };
        ApiError::new(status, code, msg)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_ledger_error_has_one_mapping() {
        let cases: Vec<(LedgerError, u16, &str)> = vec![
            (ContractError::NotFound("x".into()).into(), 404, "not_found"),
            (ContractError::Duplicate("x".into()).into(), 409, "duplicate"),
            (ContractError::Invalid("x".into()).into(), 400, "invalid"),
            (ContractError::NoEligibleServer("x".into()).into(), 404, "no_eligible_server"),
            (LedgerError::UnknownContract("x".into()), 400, "unknown_operation"),
            (LedgerError::Unavailable("x".into()), 503, "ledger_unavailable"),
            (
                LedgerError::ReadOnlyViolation {
                    contract: "c".into(),
                    operation: "o".into(),
                },
                500,
                "read_only_violation",
            ),
        ];
        for (e, status, code) in cases {
            let api = ApiError::from(e);
            assert_eq!((api.http_status, api.code.as_str()), (status, code));
        }
    }
}

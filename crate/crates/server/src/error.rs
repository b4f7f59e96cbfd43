use serde::Serialize;

use lakescope_core::hierarchy::HierarchyError;
use lakescope_core::registry::RegistryError;
use lakescope_core::relation::RelationError;
use lakescope_core::search::SearchError;

/// Every failure the service reports, grouped into classes that map to an
/// HTTP status and a CLI exit code.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no forest has been built yet")]
    NoForest,
    #[error("{0} not found")]
    NotFound(String),
    #[error("a build is already running ({0})")]
    BuildInProgress(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("{0}")]
    Strategy(String),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NoForest => "no_forest",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::BuildInProgress(_) => "build_in_progress",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::InvalidInput(_) => "invalid_input",
            ServiceError::ContractViolation(_) => "contract_violation",
            ServiceError::Strategy(_) => "strategy_failed",
            ServiceError::ProviderUnavailable(_) => "provider_unavailable",
            ServiceError::PortInUse(_) => "port_in_use",
            ServiceError::CorruptStore(_) => "corrupt_store",
            ServiceError::Internal(_) => "internal",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ServiceError::NoForest | ServiceError::BuildInProgress(_) | ServiceError::Conflict(_) => 409,
            ServiceError::NotFound(_) => 404,
            ServiceError::InvalidInput(_) => 400,
            ServiceError::ContractViolation(_) | ServiceError::Strategy(_) => 422,
            ServiceError::ProviderUnavailable(_) => 503,
            _ => 500,
        }
    }

    /// Exit codes: 2 is reserved for usage errors (clap).
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Internal(_) => 1,
            ServiceError::NotFound(_) => 3,
            ServiceError::NoForest => 4,
            ServiceError::BuildInProgress(_) | ServiceError::Conflict(_) => 5,
            ServiceError::InvalidInput(_) => 6,
            ServiceError::ContractViolation(_) | ServiceError::Strategy(_) => 7,
            ServiceError::ProviderUnavailable(_) => 8,
            ServiceError::CorruptStore(_) => 9,
            ServiceError::PortInUse(_) => 10,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
        }
    }

    pub fn io(context: &str, e: impl std::fmt::Display) -> Self {
        ServiceError::Internal(format!("{context}: {e}"))
    }
}

impl From<HierarchyError> for ServiceError {
    fn from(e: HierarchyError) -> Self {
        match e {
            HierarchyError::ContractViolation(m) => ServiceError::ContractViolation(m),
            HierarchyError::Cluster(c) => ServiceError::Strategy(c.to_string()),
            HierarchyError::InvalidConfig(m) => ServiceError::InvalidInput(m),
            HierarchyError::UnknownNode(id) => ServiceError::NotFound(format!("node {id}")),
            HierarchyError::Gateway(g) => ServiceError::ProviderUnavailable(g.to_string()),
            HierarchyError::Embed(e) => ServiceError::ProviderUnavailable(e.to_string()),
            HierarchyError::EmptyFrontier => ServiceError::InvalidInput("the catalog has no tables with columns".into()),
            e => ServiceError::Internal(e.to_string()),
        }
    }
}

impl From<RegistryError> for ServiceError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::DuplicateName { .. } => ServiceError::Conflict(e.to_string()),
            RegistryError::UnknownStrategy { .. } => ServiceError::NotFound(e.to_string()),
            RegistryError::ContractViolation(m) => ServiceError::ContractViolation(m),
            RegistryError::InvalidPayload(_) => ServiceError::InvalidInput(e.to_string()),
            RegistryError::Corrupt(m) => ServiceError::CorruptStore(m),
            RegistryError::Io(m) => ServiceError::Internal(m),
            e => ServiceError::Strategy(e.to_string()),
        }
    }
}

impl From<SearchError> for ServiceError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::EmptyQuery | SearchError::InvalidN | SearchError::InvalidKindFilter => {
                ServiceError::InvalidInput(e.to_string())
            }
            SearchError::Embed(e) => ServiceError::ProviderUnavailable(e.to_string()),
            SearchError::Hierarchy(h) => h.into(),
            e => ServiceError::Internal(e.to_string()),
        }
    }
}

impl From<RelationError> for ServiceError {
    fn from(e: RelationError) -> Self {
        match e {
            RelationError::UnknownNode(id) => ServiceError::NotFound(format!("node {id}")),
            RelationError::InvalidM | RelationError::OverlappingContext(_) => ServiceError::InvalidInput(e.to_string()),
            RelationError::Strategy(m) => ServiceError::Strategy(m),
            RelationError::Io(m) => ServiceError::Internal(m),
        }
    }
}

//! TOML description of a user-defined system.
//!
//! ```toml
//! name = "ellipse-expr"
//! dimension = 2
//! expressions = ["0.5*x*(1 + x^2 + 2*y^2)", "0.5*y*(1 + x^2 + 2*y^2)"]
//! domain = [[-inf, inf], [-inf, inf]]   # optional, default is the whole space
//! jacobian = [[0.5, 0.0], [0.0, 0.5]]   # optional
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::Expr;
use super::{DiscreteSystem, DomainBox, MapDef, SystemError};
use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum ConfigError {
    /// TOML syntax or schema error; the message includes line and column.
    #[error("{0}")]
    Toml(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    pub dimension: usize,
    pub expressions: Vec<String>,
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub jacobian: Option<Vec<Vec<f64>>>,
}

impl SystemConfig {
    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e| ConfigError::Toml(e.to_string()))
    }

    pub fn build(&self) -> Result<DiscreteSystem, ConfigError> {
        let field = |field: String, message: String| ConfigError::Field { field, message };
        if self.expressions.len() != self.dimension {
            return Err(field(
                "expressions".into(),
                format!(
                    "expected {} expressions, found {}",
                    self.dimension,
                    self.expressions.len()
                ),
            ));
        }
        let exprs = self
            .expressions
            .iter()
            .enumerate()
            .map(|(i, src)| {
                Expr::parse(src).map_err(|e| field(format!("expressions[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let domain = match &self.domain {
            None => DomainBox::whole_space(self.dimension),
            Some(bounds) => DomainBox::new(bounds.iter().map(|b| (b[0], b[1])).collect())
                .map_err(|e| field("domain".into(), e.to_string()))?,
        };
        let jacobian = match &self.jacobian {
            None => None,
            Some(rows) => {
                if rows.len() != self.dimension || rows.iter().any(|r| r.len() != self.dimension) {
                    return Err(field(
                        "jacobian".into(),
                        format!("expected a {0}x{0} matrix", self.dimension),
                    ));
                }
                Some(Matrix::from_rows(rows))
            }
        };
        DiscreteSystem::new(
            self.name.clone(),
            self.dimension,
            MapDef::Expressions(exprs),
            domain,
            jacobian,
        )
        .map_err(|e| {
            let name = match e {
                SystemError::JacobianMismatch { .. } => "jacobian",
                SystemError::OriginOutsideDomain | SystemError::BadBounds { .. } => "domain",
                SystemError::ZeroDimension => "dimension",
                _ => "expressions",
            };
            field(name.into(), e.to_string())
        })
    }
}

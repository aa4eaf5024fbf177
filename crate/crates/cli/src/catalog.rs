//! Built-in models.

use sdelab_core::{localize_model, Coefficient, LocalizationRadii, Polynomial, SdeModel};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// Acceptance criteria that use the model.
    pub criteria: &'static [u8],
    pub model: SdeModel,
}

fn indicator_drift() -> SdeModel {
    SdeModel::new(Coefficient::step(0.0, 0.0, 1.0), Coefficient::constant(1.0), 0.0, 1.0).expect("valid model")
}

fn ou() -> SdeModel {
    SdeModel::new(Coefficient::polynomial(Polynomial::affine(-1.0, 0.0)), Coefficient::constant(1.0), 0.0, 1.0)
        .expect("valid model")
}

fn brownian() -> SdeModel {
    SdeModel::new(Coefficient::constant(0.0), Coefficient::constant(1.0), 0.0, 1.0).expect("valid model")
}

fn localized_indicator() -> SdeModel {
    let radii = LocalizationRadii::uniform(1.0).expect("ordered radii");
    localize_model(&indicator_drift(), 0.0, &radii).expect("non-degenerate window")
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "indicator-drift",
            description: "mu = 1 on [0, inf), sigma = 1, x0 = 0, T = 1; unit drift jump at xi = 0",
            criteria: &[1, 2, 4, 5, 6, 7, 8, 9, 10],
            model: indicator_drift(),
        },
        CatalogEntry {
            name: "ou",
            description: "mu(x) = -x, sigma = 1, x0 = 0, T = 1; Lipschitz baseline with Gaussian closed forms",
            criteria: &[2, 3, 4, 6, 11],
            model: ou(),
        },
        CatalogEntry {
            name: "brownian",
            description: "mu = 0, sigma = 1, x0 = 0, T = 1",
            criteria: &[3, 10],
            model: brownian(),
        },
        CatalogEntry {
            name: "localized-indicator",
            description: "indicator-drift localized around xi = 0 with radii (0.2, 0.4, 0.6, 0.8, 1.0)",
            criteria: &[9],
            model: localized_indicator(),
        },
    ]
}

pub fn builtin(name: &str) -> Option<SdeModel> {
    catalog().into_iter().find(|e| e.name == name).map(|e| e.model)
}

pub fn names() -> Vec<&'static str> {
    catalog().iter().map(|e| e.name).collect()
}

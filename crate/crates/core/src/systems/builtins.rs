use super::{DiscreteSystem, DomainBox, MapDef};
use crate::linalg::Matrix;

pub const BUILTIN_NAMES: [&str; 6] = [
    "intro-quartic",
    "square",
    "moebius-e",
    "ellipse",
    "predprey",
    "vanderpol",
];

pub(super) fn builtin(name: &str) -> Option<DiscreteSystem> {
    let (dim, map, domain, jac) = match name {
        "intro-quartic" => (
            1,
            MapDef::IntroQuartic,
            DomainBox::whole_space(1),
            Matrix::diagonal(&[0.5]),
        ),
        "square" => (
            1,
            MapDef::Square,
            DomainBox::whole_space(1),
            Matrix::diagonal(&[0.0]),
        ),
        "moebius-e" => (
            1,
            MapDef::MoebiusE,
            DomainBox {
                bounds: vec![(f64::NEG_INFINITY, 1.0)],
            },
            Matrix::diagonal(&[(-1.0f64).exp()]),
        ),
        "ellipse" => (
            2,
            MapDef::Ellipse,
            DomainBox::whole_space(2),
            Matrix::diagonal(&[0.5, 0.5]),
        ),
        "predprey" => {
            let (a, b) = (0.5, 1.0);
            (
                2,
                MapDef::PredatorPrey { a, b },
                DomainBox::whole_space(2),
                Matrix::from_rows(&[vec![a, 0.0], vec![0.0, 0.0]]),
            )
        }
        "vanderpol" => {
            let a = 2.0;
            (
                2,
                MapDef::VanDerPol { a },
                DomainBox::whole_space(2),
                Matrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0 - a]]),
            )
        }
        _ => return None,
    };
    Some(DiscreteSystem::new(name, dim, map, domain, Some(jac)).expect("builtin systems are valid"))
}

//! Small named instances used by the benchmark command and the test suites.

use crate::adversary::{apply_misreport, make_lb_instance, LbKind, LbParams};
use crate::model::{parse_instance, Instance};

/// Four agents, one binary feature, one seat per value.
pub fn t1() -> Instance {
    parse_instance(
        "id,f\na1,0\na2,0\na3,1\na4,1\n",
        "feature,value,min,max\nf,0,1,1\nf,1,1,1\n",
        2,
    )
    .expect("fixture")
}

/// Two agents hold the single value-1 seat; four share two value-0 seats.
pub fn e1() -> Instance {
    parse_instance(
        "id,f\na,1\nb,1\nc,0\nd,0\ne,0\nf,0\n",
        "feature,value,min,max\nf,1,1,1\nf,0,2,2\n",
        3,
    )
    .expect("fixture")
}

/// Balanced on two binary features; the lone 01 agent is linked to the three 10 agents.
pub fn e2() -> Instance {
    parse_instance(
        "id,x,y\na,0,0\nb,0,0\nc,1,1\nd,1,1\ne,1,0\nf,1,0\ng,1,0\nh,0,1\n",
        "feature,value,min,max\nx,0,2,2\nx,1,2,2\ny,0,2,2\ny,1,2,2\n",
        4,
    )
    .expect("fixture")
}

/// Agent `c` can never sit: value 1 of `g` has no seats.
pub fn excluded() -> Instance {
    parse_instance(
        "id,f,g\na,0,0\nb,1,0\nc,1,1\nd,0,0\n",
        "feature,value,min,max\nf,0,1,1\nf,1,1,1\ng,0,2,2\ng,1,0,0\n",
        2,
    )
    .expect("fixture")
}

pub const INSTANCE_B: LbParams = LbParams {
    n: 72,
    k: 6,
    n_min: 12,
    c: 6,
};

/// Truthful and manipulated pools of the k=6, n_min=12, c=6, n=72 construction.
pub fn instance_b() -> (Instance, Instance) {
    let (truth, mis) = make_lb_instance(LbKind::Thm43, INSTANCE_B).expect("fixture");
    let after = apply_misreport(&truth, &mis).expect("fixture");
    (truth, after)
}

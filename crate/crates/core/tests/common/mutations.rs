//! Targeted mutations of valid nets, each violating exactly one
//! well-formedness rule.

use nestpn_core::Rule;

pub const FACTORIAL: &str = include_str!("../../../../nets/factorial.npn");
pub const AGENTS: &str = include_str!("../../../../nets/agents_sound3.npn");

pub struct Mutation {
    pub name: &'static str,
    pub base: &'static str,
    pub from: &'static str,
    pub to: &'static str,
    pub rule: Rule,
}

pub const MUTATIONS: &[Mutation] = &[
    Mutation {
        name: "net constant on an input arc",
        base: FACTORIAL,
        from: "in p3: [x:F];",
        to: "in p3: [x:F, new F];",
        rule: Rule::NetConstInInput,
    },
    Mutation {
        name: "variable repeated on an input arc",
        base: FACTORIAL,
        from: "in p3: [x:F];",
        to: "in p3: [x:F, x];",
        rule: Rule::RepeatedVariable,
    },
    Mutation {
        name: "net variable repeated on an output arc",
        base: FACTORIAL,
        from: "in p3: [x:F];\n      out p4: 1;",
        to: "in p3: [x:F];\n      out p4: 1;\n      out p3: [x, x];",
        rule: Rule::RepeatedVariable,
    },
    Mutation {
        name: "variable shared by two input arcs",
        base: AGENTS,
        from: "trans m12 { in L1: [x]; out L2: [x]; }",
        to: "trans m12 { in L1: [x]; in L3: [x]; out L2: [x]; }",
        rule: Rule::SharedInputVariable,
    },
    Mutation {
        name: "output variable without input",
        base: FACTORIAL,
        from: "out p3: [new F];",
        to: "out p3: [y:F];",
        rule: Rule::UnboundOutputVariable,
    },
    Mutation {
        name: "net variable on two output arcs",
        base: AGENTS,
        from: "trans m12 { in L1: [x]; out L2: [x]; }",
        to: "trans m12 { in L1: [x]; out L2: [x]; out L3: [x]; }",
        rule: Rule::UnboundOutputVariable,
    },
    Mutation {
        name: "anonymous net-typed output",
        base: FACTORIAL,
        from: "out p3: [new F];",
        to: "out p3: [_];",
        rule: Rule::AnonymousNetOutput,
    },
    Mutation {
        name: "upper label in the system net",
        base: FACTORIAL,
        from: "trans t1 {",
        to: "trans t1 label ~lam {",
        rule: Rule::SystemLabel,
    },
    Mutation {
        name: "upper-labeled transition reads a shared place",
        base: FACTORIAL,
        from: "trans t3 label ~lam {\n      in p6: 1;",
        to: "trans t3 label ~lam {\n      in p6: 1;\n      in p1: 1;",
        rule: Rule::ArcPlaces,
    },
    Mutation {
        name: "upper-labeled transition inhibited by a shared place",
        base: FACTORIAL,
        from: "trans t6 label ~lam {\n      in p8: 1;",
        to: "trans t6 label ~lam {\n      in p8: 1;\n      inhibit p5;",
        rule: Rule::ArcPlaces,
    },
];

pub fn apply(m: &Mutation) -> String {
    assert!(m.base.contains(m.from), "mutation `{}` does not apply", m.name);
    m.base.replacen(m.from, m.to, 1)
}

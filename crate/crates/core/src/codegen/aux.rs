//! Auxiliary declarations, inline macros and embedded C emitted in front of
//! every model. The text depends only on the message layout.

use super::emit::Layout;

pub(crate) fn aux_text(l: &Layout) -> String {
    let mut s = String::new();
    s.push_str("byte nt, lt, it; bit rm;\n");
    s.push_str("NetPlace cha;\n");
    s.push_str("BasicPlace chb;\n");
    s.push_str("byte v0, v1, v2;\n\n");

    // nondeterministic receive of a request or at-place message
    let fs = l.key_params();
    let pat = l.msg_pattern(&fs);
    let vs = l.msg_pattern(&["v0", "v1", "v2"][..fs.len()].iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let any = l.any_pattern();
    s.push_str(&format!(
        "/* ch ?* {pat} */\n\
         inline recMsg(ch, {params}) {{\n\
         \x20 do\n\
         \x20 :: ch ?? [{pat}] ->\n\
         \x20      ch ?? {pat};\n\
         \x20      cha.d ! {pat}\n\
         \x20 :: else -> break\n\
         \x20 od;\n\
         \x20 cha.d ? {pat};\n\
         \x20 do\n\
         \x20 :: cha.d ?? [{any}] ->\n\
         \x20      if\n\
         \x20      :: cha.d ? {vs}; ch ! {vs}\n\
         \x20      :: ch ! {pat}; cha.d ? {pat}\n\
         \x20      fi\n\
         \x20 :: else -> break\n\
         \x20 od; skip }}\n\n",
        params = fs.join(", "),
    ));
    s.push_str(
        "/* ch ?* f0 */\n\
         inline recTok(ch, f0) {\n\
         \x20 do\n\
         \x20 :: ch ?? [f0] ->\n\
         \x20      ch ?? f0;\n\
         \x20      chb.d ! f0\n\
         \x20 :: else -> break\n\
         \x20 od;\n\
         \x20 chb.d ? f0;\n\
         \x20 do\n\
         \x20 :: chb.d ?? [_] ->\n\
         \x20      if\n\
         \x20      :: chb.d ? v0; ch ! v0\n\
         \x20      :: ch ! f0; chb.d ? f0\n\
         \x20      fi\n\
         \x20 :: else -> break\n\
         \x20 od; skip }\n\n",
    );

    // all type-0 messages of net token p
    let own = l.pattern("eval(p)", "_", "_");
    s.push_str(&format!(
        "inline consNetTok(ch, p) {{\n\
         \x20 do\n\
         \x20 :: ch ?? [{own}] ->\n\
         \x20      ch ?? {own}\n\
         \x20 :: else -> break\n\
         \x20 od; skip }}\n\n"
    ));

    let at_place = l.pattern("_", "255", "0");
    let recv_at = l.pattern("nt", "255", "0");
    let removal = l.removal_response("nt", "ch");
    s.push_str(&format!(
        "inline consNetsAtPlace(ch) {{\n\
         \x20 do\n\
         \x20 :: ch ?? [{at_place}] ->\n\
         \x20      ch ?? {recv_at};\n\
         \x20      consNetTok(ch, nt);\n\
         {removal}\
         \x20 :: else -> break\n\
         \x20 od; skip }}\n\n"
    ));

    let moved_in = l.pattern("eval(p)", "v1", "v2");
    let moved_out = l.pattern("p", "v1", "v2");
    s.push_str(&format!(
        "inline transpNetTok(ch, och, p) {{\n\
         \x20 do\n\
         \x20 :: ch ?? [{own}] ->\n\
         \x20      ch ?? {moved_in};\n\
         \x20      och ! {moved_out}\n\
         \x20 :: else -> break\n\
         \x20 od; skip }}\n\n"
    ));

    // removes a pending request of the given transition (or label)
    let req = if l.tid {
        l.pattern("eval(_pid)", "_", "k")
    } else {
        l.pattern("eval(_pid)", "k", "_")
    };
    s.push_str(&format!(
        "inline rmConf(k) {{\n\
         \x20 if\n\
         \x20 :: ppChan ?? [{req}] -> ppChan ?? {req}\n\
         \x20 :: else -> skip\n\
         \x20 fi }}\n\n"
    ));

    s.push_str(&c_code(l));
    s
}

fn c_code(l: &Layout) -> String {
    let mut fields = String::new();
    let bytes: Vec<String> = (0..l.byte_fields()).map(|k| format!("fld{k}")).collect();
    fields.push_str(&format!("uchar {};", bytes.join(", ")));
    let bits: Vec<String> = (l.byte_fields()..l.field_count()).map(|k| format!("fld{k} : 1")).collect();
    if !bits.is_empty() {
        fields.push_str(&format!("\n                 unsigned {};", bits.join(", ")));
    }
    let request_only = match l.type_field() {
        Some(k) => format!(" &&\n                    ( ((QNP *)z)->contents[k].fld{k} == 0   )", k = k),
        None => String::new(),
    };
    format!(
        "c_code{{  typedef struct QNP {{\n\
         \x20            uchar Qlen; /* q_size */\n\
         \x20            uchar _t;   /* q_type */\n\
         \x20            struct {{\n\
         \x20                {fields}\n\
         \x20            }} contents[MaxMsg]; }} QNP;\n\
         \n\
         \x20        typedef struct QBP {{\n\
         \x20            uchar Qlen;\n\
         \x20            uchar _t;\n\
         \x20            struct {{ uchar fld0; }} contents[MaxTok]; }} QBP;\n\
         \n\
         \x20        int numMsg(uchar *z, int lab){{\n\
         \x20            int n = ((QNP *)z)->Qlen, c = 0;\n\
         \x20            for (int k = 0; k<n; k++)\n\
         \x20              if ( ( ((QNP *)z)->contents[k].fld1 == lab ){request_only} )   c++;\n\
         \x20            return c; }}\n\
         \n\
         \x20        int numTok(uchar *z, int col){{\n\
         \x20            int n = ((QBP *)z)->Qlen, c = 0;\n\
         \x20            for (int k = 0; k<n; k++)\n\
         \x20              if ( ((QBP *)z)->contents[k].fld0 == col )   c++;\n\
         \x20            return c; }}\n\
         }};\n\n\
         /* A call to numMsg has the form numMsg(qptr(PProcName->c - 1), v)\n\
         \x20  where c is a channel and v is an integer expression. The prefix\n\
         \x20  \"PProcName->\" (e.g. Pinit->) is used to refer a local variable\n\
         \x20  inside a c_expr. For a global variable the prefix is \"now.\" . */\n\n"
    )
}

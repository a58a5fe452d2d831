use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(f: impl FnOnce(Python<'_>, &Bound<'_, PyModule>)) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "argmine").unwrap();
        argmine_py::argmine_py(&m).unwrap();
        f(py, &m);
    });
}

#[test]
fn parse_and_normalize() {
    with_module(|_, m| {
        let (span, fallback): (String, bool) = m
            .getattr("extract")
            .unwrap()
            .call1(("<|ANSWER|> Non claim <|ANSWER|>",))
            .unwrap()
            .extract()
            .unwrap();
        assert_eq!(span, "Non claim");
        assert!(!fallback);
        let label: Option<String> = m
            .getattr("normalize")
            .unwrap()
            .call1((span, "CD"))
            .unwrap()
            .extract()
            .unwrap();
        assert_eq!(label.as_deref(), Some("Non-claim"));
        let p = m
            .getattr("parse")
            .unwrap()
            .call1(("a", "FD", "I have no idea"))
            .unwrap();
        assert_eq!(p.get_item("status").unwrap().extract::<String>().unwrap(), "unparsable");
    });
}

#[test]
fn preset_and_pruning() {
    with_module(|_, m| {
        let p = m.getattr("emit_preset").unwrap().call1(("dare iii",)).unwrap();
        assert_eq!(p.get_item("method").unwrap().extract::<String>().unwrap(), "DARE");
        let vals = vec![1.0, -2.0, 3.0];
        let out: Vec<f64> = m
            .getattr("dare")
            .unwrap()
            .call1((vals.clone(), 1.0, 9u64))
            .unwrap()
            .extract()
            .unwrap();
        assert_eq!(out, vals);
        let e = m.getattr("della").unwrap().call1((vals, 0.9, 0.2, 1u64)).unwrap_err();
        assert!(e.to_string().contains("ValueError"), "{e}");
    });
}

#[test]
fn confusion_table_class() {
    with_module(|py, m| {
        let t = m.getattr("ConfusionTable").unwrap().call1(("AR",)).unwrap();
        t.call_method1("add", ("attack", "attack")).unwrap();
        t.call_method1("add", ("support", "attack")).unwrap();
        let kw = PyDict::new(py);
        kw.set_item("pred", py.None()).unwrap();
        t.call_method("add", ("no relation",), Some(&kw)).unwrap();
        let (n, d): (u64, u64) = t.call_method0("precision").unwrap().extract().unwrap();
        assert_eq!((n, d), (1, 3));
        assert_eq!(t.len().unwrap(), 3);
    });
}

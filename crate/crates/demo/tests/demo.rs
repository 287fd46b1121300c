use framefill_demo::Demo;
use serde_json::Value;

const STORY: &str = "Charles went shopping. [blank] Then he left.";

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn three_operations() {
    let demo = Demo::new().unwrap();

    let v = parse(&demo.infill(STORY, "[Commerce_buy] [Food]", true).unwrap());
    let blank = &v["blanks"][0];
    assert_eq!(blank["position"], 1);
    assert!(!blank["candidates"].as_array().unwrap().is_empty());
    for c in blank["candidates"].as_array().unwrap() {
        assert_eq!(c["satisfied_frames"].as_array().unwrap().len(), 2, "{c}");
    }
    // same input, same bytes
    assert_eq!(
        demo.infill(STORY, "[Commerce_buy]", false),
        demo.infill(STORY, "[Commerce_buy]", false)
    );

    let v = parse(&demo.suggest(STORY, 4).unwrap());
    assert_eq!(v["frames"].as_array().unwrap().len(), 4);

    let v = parse(&demo.diversify(STORY, 2).unwrap());
    assert_eq!(v["groups"].as_array().unwrap().len(), 2);

    let v = parse(&demo.frames("heat"));
    assert!(v
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["name"] == "Apply_heat"));
}

#[test]
fn errors_are_messages() {
    let demo = Demo::new().unwrap();
    assert!(demo
        .infill(STORY, "[Not_a_frame]", false)
        .unwrap_err()
        .contains("[Not_a_frame]"));
    assert!(demo.suggest("No blank here.", 3).is_err());
}

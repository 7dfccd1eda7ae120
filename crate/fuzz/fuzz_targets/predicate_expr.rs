#![no_main]

use libfuzzer_sys::fuzz_target;
use xsect::data::Predicate;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // parsing must not panic, and anything that parses must re-parse
    // from its own display form
    if let Ok(predicate) = text.parse::<Predicate>() {
        let rendered = predicate.to_string();
        let _ = rendered.parse::<Predicate>();
    }
});

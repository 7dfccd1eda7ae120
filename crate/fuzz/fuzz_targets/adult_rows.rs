#![no_main]

use libfuzzer_sys::fuzz_target;
use std::io::Cursor;
use xsect::data::load_adult_from_reader;

fuzz_target!(|data: &[u8]| {
    // The CSV ingester must reject arbitrary bytes with an error,
    // never a panic, for any vertical split.
    let splits: [&[&str]; 3] = [
        &["age"],
        &["age", "income"],
        &["workclass", "sex", "native-country"],
    ];
    for split in splits {
        let groups: Vec<Vec<String>> =
            split.iter().map(|attr| vec![attr.to_string()]).collect();
        let _ = load_adult_from_reader(Cursor::new(data), &groups);
    }
});

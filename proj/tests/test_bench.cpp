#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace toxedge;
using toxedge::test::error_kind;

TEST(Rtf, Examples) {
    EXPECT_NEAR(rtf(0.195, 6.0), 0.0325, 1e-12);
    EXPECT_EQ(rtf(1.0, 1.0), 1.0);
    Rng rng(51);
    for (int i = 0; i < 100; ++i) {
        const double x = std::exp(rng.normal(0.0, 3.0));
        EXPECT_DOUBLE_EQ(rtf(x, 2.0 * x), 0.5);
    }
    EXPECT_EQ(error_kind([] { (void)rtf(1.0, 0.0); }), ErrorKind::Parameter);
    EXPECT_EQ(error_kind([] { (void)rtf(1.0, -1.0); }), ErrorKind::Parameter);
}

TEST(Latency, CountsTimedRunsOnly) {
    int calls = 0;
    const std::vector<Waveform> one{test::tone(0.1, 440.0)};
    const LatencyStats s = measure_latency([&](const Waveform&) { ++calls; }, one, 2, 3);
    EXPECT_EQ(s.samples.size(), 3u);
    EXPECT_EQ(calls, 5);
    EXPECT_LE(s.median_s, s.p95_s);
    for (double t : s.samples) EXPECT_GE(t, 0.0);

    const std::vector<Waveform> two{test::tone(0.1, 440.0), test::tone(0.2, 440.0)};
    EXPECT_EQ(measure_latency([](const Waveform&) {}, two, 0, 4).samples.size(), 8u);
}

TEST(Latency, Errors) {
    const std::vector<Waveform> one{test::tone(0.1, 440.0)};
    auto noop = [](const Waveform&) {};
    EXPECT_EQ(error_kind([&] { (void)measure_latency(noop, {}, 1, 3); }), ErrorKind::Parameter);
    EXPECT_EQ(error_kind([&] { (void)measure_latency(noop, one, 1, 0); }), ErrorKind::Parameter);
    ParallelRegion region;
    EXPECT_EQ(error_kind([&] { (void)measure_latency(noop, one, 1, 3); }), ErrorKind::UnsupportedNesting);
}

TEST(Latency, LongerClipTakesLonger) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    auto run = [&](const Waveform& w) { (void)forward(w, c); };
    const LatencyStats a = measure_latency(run, {normalize(test::tone(1.0, 300.0))}, 1, 5);
    const LatencyStats b = measure_latency(run, {normalize(test::tone(2.0, 300.0))}, 1, 5);
    EXPECT_GT(b.median_s, a.median_s);
}

TEST(Latency, TinyRunsFasterThanRealTime) {
    const Checkpoint c = init_checkpoint(ModelConfig::tiny(), 7);
    const LatencyStats s =
        measure_latency([&](const Waveform& w) { (void)forward(w, c); }, {normalize(test::tone(1.0, 300.0))}, 1, 5);
    EXPECT_LT(rtf(s.median_s, 1.0), 1.0);
}

TEST(BenchSuite, FourVariantRows) {
    test::TempDir dir;
    const Checkpoint f32 = init_checkpoint(ModelConfig::tiny(), 7);
    const Checkpoint student = make_student(f32, default_student_layers(f32.config.num_layers));
    const std::vector<BenchVariant> variants{
        {"mtl-f32", dir / "a.toxw"}, {"mtl-int8", dir / "b.toxw"}, {"student-f32", dir / "c.toxw"},
        {"student-int8", dir / "d.toxw"}};
    save(f32, variants[0].path);
    save(quantize_model(f32), variants[1].path);
    save(student, variants[2].path);
    save(quantize_model(student), variants[3].path);

    const auto data = synth_dataset(5, 6, 1.0, f32.config);
    const BenchReport r = bench_suite(variants, data, {0, 2});
    ASSERT_EQ(r.rows.size(), 4u);
    const std::vector<std::string> techniques{"f32", "quantized", "student", "quantized-student"};
    for (std::size_t i = 0; i < 4; ++i) {
        const BenchResult& row = r.rows[i];
        EXPECT_EQ(row.variant, variants[i].name);
        EXPECT_EQ(row.technique, techniques[i]);
        EXPECT_EQ(row.model_size_bytes, model_size_bytes(variants[i].path));
        EXPECT_EQ(row.clip_count, 6u);
        EXPECT_NEAR(row.total_audio_s, 6.0, 1e-9);
        EXPECT_DOUBLE_EQ(row.rtf, row.total_inference_s / row.total_audio_s);
        EXPECT_LT(row.rtf, 1.0);
        EXPECT_GE(row.macro_f1, 0.0);
        EXPECT_GT(row.peak_ram_bytes, 0u);
    }
    const double full = static_cast<double>(r.rows[0].model_size_bytes);
    const double combined = full / static_cast<double>(r.rows[3].model_size_bytes);
    EXPECT_GT(combined, full / static_cast<double>(r.rows[1].model_size_bytes));
    EXPECT_GT(combined, full / static_cast<double>(r.rows[2].model_size_bytes));
    EXPECT_LT(r.rows[1].peak_ram_bytes, r.rows[0].peak_ram_bytes);

    // Only time columns may differ between runs.
    const BenchReport again = bench_suite(variants, data, {0, 1});
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(again.rows[i].macro_f1, r.rows[i].macro_f1);
        EXPECT_EQ(again.rows[i].model_size_bytes, r.rows[i].model_size_bytes);
        EXPECT_EQ(again.rows[i].peak_ram_bytes, r.rows[i].peak_ram_bytes);
    }

    std::ostringstream csv, table;
    write_csv(r, csv);
    write_table(r, table);
    std::istringstream lines(csv.str());
    std::string first;
    std::getline(lines, first);
    EXPECT_EQ(first, kBenchCsvHeader);
    const std::string text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
    EXPECT_NE(text.find("\nmtl-int8,"), std::string::npos);
    EXPECT_NE(table.str().find("3.97"), std::string::npos);
    EXPECT_NE(table.str().find("14.59"), std::string::npos);
    EXPECT_NE(table.str().find("not OS resident set"), std::string::npos);
}

TEST(BenchSuite, Errors) {
    test::TempDir dir;
    ModelConfig other = ModelConfig::tiny();
    other.vocab_size = 12;
    save(init_checkpoint(ModelConfig::tiny(), 1), dir / "a.toxw");
    save(init_checkpoint(other, 1), dir / "b.toxw");
    const auto data = synth_dataset(5, 2, 1.0, ModelConfig::tiny());
    EXPECT_EQ(error_kind([&] { (void)bench_suite({{"a", dir / "a.toxw"}, {"b", dir / "b.toxw"}}, data, {0, 1}); }),
              ErrorKind::Config);
    EXPECT_EQ(error_kind([&] { (void)bench_suite({{"a", dir / "a.toxw"}}, {}, {0, 1}); }), ErrorKind::Parameter);
    EXPECT_EQ(error_kind([&] { (void)bench_suite({{"x", dir / "missing.toxw"}}, data, {0, 1}); }), ErrorKind::Io);
}

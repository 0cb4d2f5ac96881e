#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "mywear/beat_classifier.hpp"
#include "mywear/error.hpp"
#include "mywear/synthetic.hpp"

using namespace mywear;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mywear_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string row(double value, const std::string& label) {
  std::string s;
  for (std::size_t i = 0; i < kBeatWindow; ++i) s += std::to_string(value) + ",";
  return s + label + "\n";
}

// Predicts a fixed class; the probability vector is one-hot.
class ConstantPredictor final : public beats::BeatPredictor {
 public:
  explicit ConstantPredictor(BeatClass c) : c_(c) {}
  std::array<double, kBeatClassCount> predict(std::span<const double, kBeatWindow>) const override {
    std::array<double, kBeatClassCount> p{};
    p[static_cast<std::size_t>(c_)] = 1.0;
    return p;
  }
  std::string model_hash() const override { return "constant"; }

 private:
  BeatClass c_;
};

}  // namespace

TEST_CASE("segment loader") {
  const auto path = temp_file("segs.csv");
  std::ofstream(path) << row(0.0, "0.000000000000000000e+00") << row(0.5, "2");
  const auto segs = beats::load_mitbih_segments(path);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].label == BeatClass::N);
  CHECK(std::all_of(segs[0].window.begin(), segs[0].window.end(), [](double v) { return v == 0.0; }));
  CHECK(segs[1].label == BeatClass::V);

  auto code = [&](const std::string& content) {
    std::ofstream(path) << content;
    try {
      beats::load_mitbih_segments(path);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  CHECK(code(row(0.0, "7")) == Errc::UnknownLabel);
  CHECK(code(row(0.0, "1.5")) == Errc::UnknownLabel);
  CHECK(code(row(1.5, "0")) == Errc::MalformedRow);
  CHECK(code("0.1,0.2,0\n") == Errc::MalformedRow);
}

TEST_CASE("segments survive a write/load round-trip") {
  const auto segs = synth::beat_corpus(40, 5);
  const auto path = temp_file("roundtrip.csv");
  beats::write_segments(path, segs);
  const auto back = beats::load_mitbih_segments(path);
  REQUIRE(back.size() == segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    CHECK(back[i].label == segs[i].label);
    for (std::size_t k = 0; k < kBeatWindow; ++k) CHECK(back[i].window[k] == doctest::Approx(segs[i].window[k]));
  }
}

TEST_CASE("synthetic corpus follows the requested class shares") {
  const auto segs = synth::beat_corpus(5000, 1);
  std::array<std::size_t, kBeatClassCount> counts{};
  for (const auto& s : segs) {
    ++counts[static_cast<std::size_t>(*s.label)];
    for (double v : s.window) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  for (std::size_t c = 0; c < kBeatClassCount; ++c) {
    CHECK(static_cast<double>(counts[c]) / 5000.0 == doctest::Approx(synth::kMitbihClassShare[c]).epsilon(0.2));
  }
}

TEST_CASE("stratified split keeps every class share and is seeded") {
  const auto segs = synth::beat_corpus(2000, 2);
  const auto [train, test] = beats::stratified_split(segs, 0.8, 11);
  CHECK(train.size() + test.size() == segs.size());
  std::map<BeatClass, std::size_t> all, tr;
  for (const auto& s : segs) ++all[*s.label];
  for (const auto& s : train) ++tr[*s.label];
  for (const auto& [c, n] : all) CHECK(std::abs(static_cast<double>(tr[c]) - 0.8 * static_cast<double>(n)) <= 1.0);

  const auto again = beats::stratified_split(segs, 0.8, 11);
  REQUIRE(again.first.size() == train.size());
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(again.first[i].window == train[i].window);
}

TEST_CASE("stratified subset has the exact size and rounded class shares") {
  const auto corpus = synth::beat_corpus(2000, 41);
  std::array<std::size_t, kBeatClassCount> full{};
  for (const auto& s : corpus) ++full[static_cast<std::size_t>(*s.label)];
  for (std::size_t count : {1u, 7u, 100u, 333u, 1999u}) {
    const auto sub = beats::stratified_subset(corpus, count, 5);
    CHECK(sub.size() == count);
    std::array<std::size_t, kBeatClassCount> got{};
    for (const auto& s : sub) ++got[static_cast<std::size_t>(*s.label)];
    for (std::size_t c = 0; c < kBeatClassCount; ++c) {
      const double exact = static_cast<double>(count * full[c]) / static_cast<double>(corpus.size());
      CHECK(std::abs(static_cast<double>(got[c]) - exact) < 1.0);
    }
  }
  CHECK(beats::stratified_subset(corpus, 5000, 5).size() == corpus.size());
}

TEST_CASE("metrics on a hand-built confusion matrix") {
  // rows: truth, columns: prediction
  const beats::ConfusionMatrix cm{{{50, 2, 1, 0, 0},
                                   {3, 10, 0, 0, 0},
                                   {1, 0, 20, 1, 0},
                                   {0, 0, 2, 5, 0},
                                   {0, 0, 0, 0, 5}}};
  const auto r = beats::metrics_from_confusion(cm);
  CHECK(r.total == 100);
  CHECK(r.accuracy_pct == doctest::Approx(90.0));
  CHECK(r.class_precision_pct[0] == doctest::Approx(100.0 * 50 / 54));
  CHECK(r.class_precision_pct[2] == doctest::Approx(100.0 * 20 / 23));
  CHECK(r.class_recall_pct[1] == doctest::Approx(100.0 * 10 / 13));
  CHECK(r.class_recall_pct[3] == doctest::Approx(100.0 * 5 / 7));
  CHECK(r.class_accuracy_pct[0] == doctest::Approx(93.0));
  CHECK(r.precision_pct == doctest::Approx(100.0 * (50.0 / 54 + 10.0 / 12 + 20.0 / 23 + 5.0 / 6 + 1.0) / 5));
  CHECK(r.recall_pct == doctest::Approx(100.0 * (50.0 / 53 + 10.0 / 13 + 20.0 / 22 + 5.0 / 7 + 1.0) / 5));
  CHECK(r.support[2] == 22);
}

TEST_CASE("a perfect predictor scores 100 everywhere") {
  beats::ConfusionMatrix cm{};
  cm[0][0] = 40;
  cm[2][2] = 7;
  const auto r = beats::metrics_from_confusion(cm);
  CHECK(r.accuracy_pct == 100.0);
  CHECK(r.precision_pct == 100.0);
  CHECK(r.recall_pct == 100.0);
}

TEST_CASE("evaluate rejects an empty set") {
  const auto net = beats::build_network({}, 1);
  CHECK_THROWS_AS(beats::evaluate(net, std::vector<BeatSegment>{}), Error);
}

TEST_CASE("stream with no peaks classifies nothing") {
  const auto ecg = make_sample_series(Channel::Ecg, 125, 0, std::vector<double>(500, 0.0));
  const ConstantPredictor model(BeatClass::V);
  const auto r = beats::classify_stream(model, ecg, std::vector<std::size_t>{});
  CHECK(r.beats.empty());
  CHECK(r.skipped.empty());
}

TEST_CASE("a tiled beat gets the class of its own window everywhere") {
  constexpr std::size_t period = 100;
  const auto proto = synth::beat_corpus(1, 3)[0];
  std::vector<double> stream;
  std::vector<std::size_t> peaks;
  for (int k = 0; k < 8; ++k) {
    peaks.push_back(stream.size());
    stream.insert(stream.end(), proto.window.begin(), proto.window.begin() + period);
  }
  const auto ecg = make_sample_series(Channel::Ecg, kBeatRateHz, 0, stream);

  // Expected window by hand: 1.2 * period samples from the peak, min-max
  // scaled, zero padded.
  std::array<double, kBeatWindow> expected{};
  std::vector<double> span;
  for (std::size_t i = 0; i < 120; ++i) span.push_back(stream[i]);
  const auto [lo, hi] = std::minmax_element(span.begin(), span.end());
  for (std::size_t i = 0; i < span.size(); ++i) expected[i] = (span[i] - *lo) / (*hi - *lo);

  const auto windows = beats::extract_beat_windows(ecg, peaks);
  CHECK(windows.skipped == std::vector<std::size_t>{7});
  REQUIRE(windows.windows.size() == 7);
  for (const auto& w : windows.windows) {
    for (std::size_t i = 0; i < kBeatWindow; ++i) CHECK(w[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }

  const beats::NetworkPredictor model(beats::build_network({}, 9));
  const auto want = model.predict(expected);
  const auto want_class = static_cast<BeatClass>(std::max_element(want.begin(), want.end()) - want.begin());
  const auto r = beats::classify_stream(model, ecg, peaks);
  REQUIRE(r.beats.size() == 7);
  for (const auto& b : r.beats) CHECK(b.label == want_class);
  CHECK(r.skipped == std::vector<std::size_t>{7});
}

TEST_CASE("model hash identifies the parameters") {
  const beats::NetworkPredictor a(beats::build_network({}, 1));
  const beats::NetworkPredictor b(beats::build_network({}, 1));
  const beats::NetworkPredictor c(beats::build_network({}, 2));
  CHECK(a.model_hash() == b.model_hash());
  CHECK(a.model_hash() != c.model_hash());
  CHECK(a.model_hash().size() == 64);
}

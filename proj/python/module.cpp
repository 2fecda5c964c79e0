#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <vector>

#include "cdckws/cdc.hpp"
#include "cdckws/detect.hpp"
#include "cdckws/error.hpp"
#include "cdckws/eval.hpp"
#include "cdckws/io.hpp"
#include "cdckws/trellis.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace cdckws;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

PosteriorGram to_posteriorgram(const FloatArray& logp, double frame_ms) {
  if (logp.ndim() != 2) throw py::value_error("posteriors must be a 2-D (frames x vocab) array");
  const auto* data = logp.data();
  std::vector<float> values(data, data + logp.size());
  return PosteriorGram(static_cast<std::size_t>(logp.shape(0)), static_cast<std::size_t>(logp.shape(1)),
                       std::move(values), frame_ms);
}

std::vector<double> to_vector(const DoubleArray& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::tuple scores_to_arrays(const std::vector<FrameScore>& scores) {
  py::array_t<double> score_log(static_cast<py::ssize_t>(scores.size()));
  py::array_t<std::int64_t> path_len(static_cast<py::ssize_t>(scores.size()));
  auto s = score_log.mutable_unchecked<1>();
  auto l = path_len.mutable_unchecked<1>();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    s(static_cast<py::ssize_t>(i)) = scores[i].score_log;
    l(static_cast<py::ssize_t>(i)) = static_cast<std::int64_t>(scores[i].path_len);
  }
  return py::make_tuple(score_log, path_len);
}

DecoderConfig make_config(double log_bonus, double timeout_s, bool literal_entry, const std::string& tie_break) {
  DecoderConfig c;
  c.log_bonus = log_bonus;
  c.timeout_s = timeout_s;
  c.literal_entry = literal_entry;
  if (tie_break == "shorter") c.tie_break = TieBreak::PreferShorter;
  else if (tie_break == "longer") c.tie_break = TieBreak::PreferLonger;
  else throw py::value_error("tie_break must be 'shorter' or 'longer'");
  return c;
}

}  // namespace

PYBIND11_MODULE(cdckws, m) {
  m.doc() = "Streaming CTC keyword spotting with cross-layer discrimination consistency rescoring";
#ifdef CDCKWS_VERSION
  m.attr("__version__") = CDCKWS_VERSION;
#endif

  static py::exception<KwsError> kws_error(m, "KwsError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const KwsError& e) {
      py::set_error(kws_error, e.what());
    }
  });

  py::class_<KeywordSpec>(m, "KeywordSpec")
      .def_readonly("tokens", &KeywordSpec::tokens)
      .def_readonly("augmented", &KeywordSpec::augmented)
      .def_readonly("blank", &KeywordSpec::blank)
      .def("__len__", &KeywordSpec::num_states);

  m.def("expand_keyword", [](const std::vector<TokenId>& tokens, TokenId blank) { return expand_keyword(tokens, blank); },
        "tokens"_a, "blank"_a = kBlank, "Interleave blanks into a keyword token sequence.");

  py::class_<DecoderConfig>(m, "DecoderConfig")
      .def(py::init(&make_config), "log_bonus"_a = 3.0, "timeout_s"_a = 3.0, "literal_entry"_a = true,
           "tie_break"_a = "shorter")
      .def_readwrite("log_bonus", &DecoderConfig::log_bonus)
      .def_readwrite("timeout_s", &DecoderConfig::timeout_s)
      .def_readwrite("literal_entry", &DecoderConfig::literal_entry)
      .def("timeout_frames", &DecoderConfig::timeout_frames, "frame_ms"_a = kDefaultFrameMs);

  m.def(
      "decode_utterance",
      [](const FloatArray& logp, const std::vector<TokenId>& tokens, const DecoderConfig& config, double frame_ms) {
        const auto pg = to_posteriorgram(logp, frame_ms);
        return scores_to_arrays(decode_utterance(pg, expand_keyword(tokens), config));
      },
      "logp"_a, "tokens"_a, "config"_a = DecoderConfig{}, "frame_ms"_a = kDefaultFrameMs,
      "Decode a (frames x vocab) log-posterior matrix. Returns (score_log, path_len).");

  py::class_<KeywordDecoder>(m, "KeywordDecoder")
      .def(py::init([](const std::vector<TokenId>& tokens, std::size_t vocab_size, const DecoderConfig& config,
                       double frame_ms) { return KeywordDecoder(expand_keyword(tokens), config, vocab_size, frame_ms); }),
           "tokens"_a, "vocab_size"_a, "config"_a = DecoderConfig{}, "frame_ms"_a = kDefaultFrameMs)
      .def(
          "push",
          [](KeywordDecoder& d, const FloatArray& frame) {
            if (frame.ndim() != 1) throw py::value_error("frame must be 1-D");
            const auto fs = d.push(std::span<const float>(frame.data(), static_cast<std::size_t>(frame.size())));
            return py::make_tuple(fs.score_log, fs.path_len);
          },
          "frame"_a)
      .def("reset", &KeywordDecoder::reset)
      .def_property_readonly("timeout_frames", &KeywordDecoder::timeout_frames);

  m.def(
      "to_linear_unit",
      [](const DoubleArray& score_log) {
        std::vector<FrameScore> fs;
        for (double s : to_vector(score_log)) fs.push_back({0, s, 0, s});
        return to_array(to_linear_unit(fs).scores);
      },
      "score_log"_a, "exp(score_log) clamped to [0, 1].");

  m.def(
      "cdc_scores",
      [](const DoubleArray& init, const DoubleArray& inter, std::size_t l_his, std::size_t l_fut) {
        return to_array(cdc_scores({to_vector(init), StreamRole::Init}, {to_vector(inter), StreamRole::Inter},
                                   CdcConfig{l_his, l_fut})
                            .scores);
      },
      "init"_a, "inter"_a, "l_his"_a = 0, "l_fut"_a = 30);

  m.def(
      "refine",
      [](const DoubleArray& init, const DoubleArray& cdc) {
        return to_array(refine({to_vector(init), StreamRole::Init}, {to_vector(cdc), StreamRole::Cdc}).scores);
      },
      "init"_a, "cdc"_a);

  py::class_<StreamingRefiner>(m, "StreamingRefiner")
      .def(py::init([](std::size_t l_his, std::size_t l_fut) { return StreamingRefiner(CdcConfig{l_his, l_fut}); }),
           "l_his"_a = 0, "l_fut"_a = 30)
      .def(
          "push",
          [](StreamingRefiner& r, double init, double inter) {
            py::list out;
            for (const auto& f : r.push(init, inter)) out.append(py::make_tuple(f.t, f.refined));
            return out;
          },
          "init"_a, "inter"_a)
      .def("finish", [](StreamingRefiner& r) {
        py::list out;
        for (const auto& f : r.finish()) out.append(py::make_tuple(f.t, f.refined));
        return out;
      });

  m.def(
      "detect_events",
      [](const DoubleArray& scores, double threshold, double lockout_s, double frame_ms) {
        py::list out;
        for (const auto& e : detect_events(to_vector(scores), DetectConfig{threshold, lockout_s}, frame_ms))
          out.append(py::make_tuple(e.t, e.time_s, e.score));
        return out;
      },
      "scores"_a, "threshold"_a, "lockout_s"_a = 3.0, "frame_ms"_a = kDefaultFrameMs);

  m.def(
      "evaluate",
      [](const py::list& utterances, double far, double lockout_s, const std::string& format) {
        std::vector<ScoredUtterance> corpus;
        for (const auto& item : utterances) {
          const auto t = item.cast<py::tuple>();
          if (t.size() != 5) throw py::value_error("expected (id, label, snr_db, duration_s, scores)");
          UtteranceRecord r;
          r.id = t[0].cast<std::string>();
          const auto label = t[1].cast<std::string>();
          if (label != "positive" && label != "negative") throw py::value_error("label must be positive/negative");
          r.label = label == "positive" ? Label::Positive : Label::Negative;
          if (!t[2].is_none()) r.snr_db = t[2].cast<double>();
          r.duration_s = t[3].cast<double>();
          corpus.push_back(make_scored(r, to_vector(t[4].cast<DoubleArray>())));
        }
        EvalOptions opts;
        opts.lockout_s = lockout_s;
        const auto report = evaluate(corpus, far, opts);
        return format == "json" ? format_report_json(report) : format_report_text(report, opts);
      },
      "utterances"_a, "far"_a = 0.05, "lockout_s"_a = 3.0, "format"_a = "json",
      "Evaluate (id, label, snr_db, duration_s, scores) tuples; returns the report text.");

  m.def("roc_auc", [](const DoubleArray& pos, const DoubleArray& neg) { return roc_auc(to_vector(pos), to_vector(neg)); },
        "positive"_a, "negative"_a);

  m.def(
      "load_posteriors",
      [](const std::filesystem::path& path) {
        const auto pg = io::load_posteriors(path);
        py::array_t<float> out({static_cast<py::ssize_t>(pg.num_frames()), static_cast<py::ssize_t>(pg.vocab_size())});
        std::copy(pg.data().begin(), pg.data().end(), out.mutable_data());
        return out;
      },
      "path"_a);
  m.def(
      "save_posteriors",
      [](const FloatArray& logp, const std::filesystem::path& path) {
        io::save_posteriors(to_posteriorgram(logp, kDefaultFrameMs), path);
      },
      "logp"_a, "path"_a);
  m.def("load_scores", [](const std::filesystem::path& path) { return to_array(io::load_scores(path)); }, "path"_a);
  m.def(
      "save_scores", [](const DoubleArray& s, const std::filesystem::path& path) { io::save_scores(to_vector(s), path); },
      "scores"_a, "path"_a);
  m.def(
      "keyword_to_tokens",
      [](const std::string& phrase, const std::filesystem::path& lexicon, const std::filesystem::path& phones) {
        return io::keyword_to_tokens(phrase, io::Lexicon::load(lexicon), io::PhoneTable::load(phones));
      },
      "phrase"_a, "lexicon"_a, "phones"_a);
}

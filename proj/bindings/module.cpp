#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "defdts/baselines.hpp"
#include "defdts/corpus.hpp"
#include "defdts/errors.hpp"
#include "defdts/metrics.hpp"
#include "defdts/parser.hpp"
#include "defdts/pipeline.hpp"
#include "defdts/prompt.hpp"

namespace py = pybind11;
using namespace defdts;

namespace {

corpus::SegmentIds make_ids(const std::vector<int>& ids) {
  corpus::SegmentIds s;
  s.ids = ids;
  s.validate();
  return s;
}

corpus::Dialogue make_dialogue(const std::string& id,
                               const std::vector<py::dict>& utterances) {
  corpus::Dialogue d;
  d.id = id;
  int i = 0;
  for (const py::dict& u : utterances) {
    corpus::Utterance utt;
    utt.index = i++;
    utt.speaker = u["speaker"].cast<std::string>();
    utt.text = u["text"].cast<std::string>();
    if (u.contains("segment_id")) utt.gold_segment_id = u["segment_id"].cast<int>();
    d.utterances.push_back(std::move(utt));
  }
  d.validate();
  return d;
}

prompt::PromptVariant make_variant(const std::string& mode, const std::string& format) {
  return {prompt::parse_mode(mode), prompt::parse_format(format)};
}

}  // namespace

PYBIND11_MODULE(_defdts, m) {
  m.doc() = "Dialogue topic segmentation core (metrics, prompting, parsing, baselines)";

  py::register_exception<Error>(m, "DefdtsError");

  m.def(
      "pk_error",
      [](const std::vector<int>& ref, const std::vector<int>& hyp,
         std::optional<int> k) {
        return metrics::pk_error(make_ids(ref), make_ids(hyp), k);
      },
      py::arg("ref"), py::arg("hyp"), py::arg("k") = std::nullopt);

  m.def(
      "window_diff",
      [](const std::vector<int>& ref, const std::vector<int>& hyp,
         std::optional<int> k) {
        return metrics::window_diff(make_ids(ref), make_ids(hyp), k);
      },
      py::arg("ref"), py::arg("hyp"), py::arg("k") = std::nullopt);

  m.def(
      "boundary_f1",
      [](const std::vector<int>& ref, const std::vector<int>& hyp) {
        return metrics::boundary_f1(make_ids(ref), make_ids(hyp));
      },
      py::arg("ref"), py::arg("hyp"),
      "Returns (precision, recall, f1); position 0 is excluded.");

  m.def("cohen_kappa", &metrics::cohen_kappa, py::arg("a"), py::arg("b"));

  m.def(
      "chi_square_test",
      [](const std::vector<std::vector<double>>& observed) {
        metrics::ContingencyTable t;
        t.observed = observed;
        auto r = metrics::chi_square_test(t);
        return py::make_tuple(r.statistic, r.df, r.p_value);
      },
      py::arg("observed"), "Returns (statistic, df, p_value).");

  m.def(
      "to_boundaries",
      [](const std::vector<int>& ids) {
        auto b = corpus::to_boundaries(make_ids(ids));
        std::vector<int> out(b.bits.begin(), b.bits.end());
        return out;
      },
      py::arg("segment_ids"));

  m.def(
      "from_boundaries",
      [](const std::vector<int>& bits) {
        corpus::BoundaryVector b;
        for (int v : bits) b.bits.push_back(uint8_t(v != 0));
        return corpus::from_boundaries(b).ids;
      },
      py::arg("bits"));

  m.def(
      "deduce_shift",
      [](const std::string& intent, const std::string& pool_tag) {
        return parser::deduce_shift(intent, prompt::builtin_pool(pool_tag));
      },
      py::arg("intent"), py::arg("pool") = "tiage");

  m.def(
      "builtin_pool",
      [](const std::string& tag) {
        prompt::IntentPool pool = prompt::builtin_pool(tag);
        py::list out;
        for (const prompt::IntentDef& d : pool.intents) {
          py::dict e;
          e["name"] = d.name;
          e["description"] = d.description;
          e["implies_shift"] = d.implies_shift;
          out.append(e);
        }
        return out;
      },
      py::arg("tag"));

  m.def(
      "build_prompt",
      [](const std::string& dialogue_id, const std::vector<py::dict>& utterances,
         const std::string& pool_tag, const std::string& mode,
         const std::string& format) {
        auto d = make_dialogue(dialogue_id, utterances);
        auto pool = prompt::builtin_pool(pool_tag);
        auto p = prompt::build_prompt(d, pool, make_variant(mode, format));
        py::dict out;
        out["text"] = p.text;
        out["expected_block_count"] = p.expected_block_count;
        out["prompt_hash"] = p.prompt_hash;
        return out;
      },
      py::arg("dialogue_id"), py::arg("utterances"), py::arg("pool") = "tiage",
      py::arg("mode") = "FULL", py::arg("format") = "XML");

  m.def(
      "parse_output",
      [](const std::string& text, int expected_n, const std::string& pool_tag,
         const std::string& mode, const std::string& format) {
        auto pool = prompt::builtin_pool(pool_tag);
        auto variant = make_variant(mode, format);
        auto res = parser::parse_output(text, expected_n, pool, variant.format,
                                        parser::options_for(variant));
        py::dict out;
        out["scoreable"] = res.scoreable();
        py::list errors;
        for (const parser::ParseError& e : res.errors) {
          py::dict pe;
          pe["kind"] = parser::error_kind_name(e.kind);
          pe["location"] = e.location;
          pe["detail"] = e.detail;
          errors.append(pe);
        }
        out["errors"] = errors;
        out["warnings"] = res.warnings;
        if (res.scoreable()) {
          out["segments"] = parser::to_segmentation(*res.parsed, pool).ids;
          py::list labels;
          for (const auto& a : res.parsed->analyses) labels.append(a.shift_label);
          out["labels"] = labels;
        }
        return out;
      },
      py::arg("text"), py::arg("expected_n"), py::arg("pool") = "tiage",
      py::arg("mode") = "FULL", py::arg("format") = "XML");

  m.def(
      "texttiling",
      [](const std::string& dialogue_id, const std::vector<py::dict>& utterances) {
        return baselines::texttiling(make_dialogue(dialogue_id, utterances)).ids;
      },
      py::arg("dialogue_id"), py::arg("utterances"));

  m.def(
      "random_segmenter",
      [](const std::string& dialogue_id, const std::vector<py::dict>& utterances,
         uint64_t seed) {
        return baselines::random_segmenter(make_dialogue(dialogue_id, utterances), seed)
            .ids;
      },
      py::arg("dialogue_id"), py::arg("utterances"), py::arg("seed") = 0);

  m.def(
      "synth_corpus",
      [](uint64_t seed, int n_dialogues, std::pair<int, int> segments,
         std::pair<int, int> utterances, double disjointness) {
        corpus::SynthConfig cfg;
        cfg.seed = seed;
        cfg.n_dialogues = n_dialogues;
        cfg.segments_per_dialogue = segments;
        cfg.utterances_per_segment = utterances;
        cfg.vocab_disjointness = disjointness;
        corpus::Corpus c = corpus::synth_corpus(cfg);
        py::list out;
        for (const corpus::Dialogue& d : c.dialogues) {
          py::dict dd;
          dd["id"] = d.id;
          py::list utts;
          for (const corpus::Utterance& u : d.utterances) {
            py::dict uu;
            uu["speaker"] = u.speaker;
            uu["text"] = u.text;
            if (u.gold_segment_id) uu["segment_id"] = *u.gold_segment_id;
            utts.append(uu);
          }
          dd["utterances"] = utts;
          out.append(dd);
        }
        return out;
      },
      py::arg("seed") = 0, py::arg("n_dialogues") = 10,
      py::arg("segments") = std::pair<int, int>{3, 5},
      py::arg("utterances") = std::pair<int, int>{2, 6},
      py::arg("disjointness") = 1.0);
}

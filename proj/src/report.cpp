#include "protolens/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "protolens/errors.hpp"

namespace protolens {
namespace {

std::string fixed(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.*f", precision, v);
  return buf;
}

std::size_t listed(std::size_t total, std::size_t top) { return top == 0 ? total : std::min(total, top); }

}  // namespace

ExplanationReport explain_instance(const Model& model, std::string_view text, double threshold) {
  if (!model.aligned()) throw NotAlignedError("model has not been through prototype alignment");
  const PreparedText input = prepare_text(text, model.dims);
  if (input.tokenized.tokens.empty()) throw InvalidParameter("explain: text has no tokens");
  const ForwardResult fw = forward(model, input);

  ExplanationReport report;
  report.text = std::string(text);
  report.predicted_class = fw.prediction;
  report.probability = fw.probabilities[static_cast<Eigen::Index>(fw.prediction)];

  for (std::size_t k = 0; k < model.dims.prototypes; ++k) {
    PrototypeExplanation pe;
    pe.prototype_id = k;
    for (const auto& rec : model.alignment) {
      if (rec.prototype == k && !rec.sentences.empty()) pe.aligned_sentence = rec.sentences.front();
    }
    pe.similarity_score = fw.normalized[static_cast<Eigen::Index>(k)];
    pe.class_weight = model.bank.class_weight_of(k);
    pe.span_part_range = extract_discrete_span(fw.prototypes[k].mask, threshold);
    if (pe.span_part_range) {
      const Part& first = input.parts.parts[pe.span_part_range->first - 1];
      const Part& last = input.parts.parts[pe.span_part_range->last - 1];
      const std::size_t begin = input.tokenized.offsets[first.start].begin;
      const std::size_t end = input.tokenized.offsets[last.end - 1].end;
      pe.span_text = report.text.substr(begin, end - begin);
    }
    report.prototypes.push_back(std::move(pe));
  }
  std::stable_sort(report.prototypes.begin(), report.prototypes.end(),
                   [](const auto& a, const auto& b) { return a.similarity_score > b.similarity_score; });
  return report;
}

std::vector<PrototypeRow> prototype_table(const Model& model) {
  if (!model.aligned()) throw NotAlignedError("model has no alignment log");
  std::vector<PrototypeRow> rows;
  for (std::size_t k = 0; k < model.dims.prototypes; ++k) {
    PrototypeRow row;
    row.prototype_id = k;
    for (const auto& rec : model.alignment) {
      if (rec.prototype == k && !rec.sentences.empty()) row.aligned_sentence = rec.sentences.front();
    }
    row.class_weight = model.bank.class_weight_of(k);
    rows.push_back(std::move(row));
  }
  return rows;
}

RenderFormat parse_render_format(const std::string& name) {
  if (name == "text") return RenderFormat::Text;
  if (name == "json") return RenderFormat::Json;
  throw InvalidParameter("format must be text or json, got \"" + name + "\"");
}

nlohmann::ordered_json report_to_json(const ExplanationReport& report, std::size_t top) {
  nlohmann::ordered_json j;
  j["text"] = report.text;
  j["prediction"] = {{"class", report.predicted_class}, {"probability", report.probability}};
  j["prototypes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < listed(report.prototypes.size(), top); ++i) {
    const auto& p = report.prototypes[i];
    nlohmann::ordered_json e;
    e["prototype_id"] = p.prototype_id;
    e["aligned_sentence"] = p.aligned_sentence;
    e["span_text"] = p.span_text;
    if (p.span_part_range) {
      e["span_part_range"] = {p.span_part_range->first, p.span_part_range->last};
    } else {
      e["span_part_range"] = nullptr;
    }
    e["similarity_score"] = p.similarity_score;
    e["class_weight"] = p.class_weight;
    j["prototypes"].push_back(std::move(e));
  }
  return j;
}

ExplanationReport report_from_json(const nlohmann::json& j) {
  ExplanationReport r;
  r.text = j.at("text").get<std::string>();
  r.predicted_class = j.at("prediction").at("class").get<std::size_t>();
  r.probability = j.at("prediction").at("probability").get<double>();
  for (const auto& e : j.at("prototypes")) {
    PrototypeExplanation p;
    p.prototype_id = e.at("prototype_id").get<std::size_t>();
    p.aligned_sentence = e.at("aligned_sentence").get<std::string>();
    p.span_text = e.at("span_text").get<std::string>();
    if (!e.at("span_part_range").is_null()) {
      p.span_part_range = DiscreteSpan{e.at("span_part_range").at(0).get<std::size_t>(),
                                       e.at("span_part_range").at(1).get<std::size_t>()};
    }
    p.similarity_score = e.at("similarity_score").get<double>();
    p.class_weight = e.at("class_weight").get<double>();
    r.prototypes.push_back(std::move(p));
  }
  return r;
}

std::string render(const ExplanationReport& report, RenderFormat format, std::size_t top) {
  if (format == RenderFormat::Json) return report_to_json(report, top).dump(2) + "\n";

  std::ostringstream out;
  out << "prediction: class " << report.predicted_class << " (p=" << fixed(report.probability).substr(1) << ")\n";
  out << "text: " << report.text << "\n\n";
  out << "rank  proto  similarity  weight   span\n";
  for (std::size_t i = 0; i < listed(report.prototypes.size(), top); ++i) {
    const auto& p = report.prototypes[i];
    char head[64];
    std::snprintf(head, sizeof(head), "%-5zu P%-5zu%-12s%-9s", i + 1, p.prototype_id, fixed(p.similarity_score).c_str(),
                  fixed(p.class_weight, 3).c_str());
    out << head;
    if (p.span_part_range) {
      out << "[[" << p.span_text << "]]\n";
    } else {
      out << "(no span above threshold)\n";
    }
    out << "      aligned: " << (p.aligned_sentence.empty() ? "(none)" : p.aligned_sentence) << "\n";
  }
  return out.str();
}

std::string render_table(const std::vector<PrototypeRow>& rows, RenderFormat format) {
  if (format == RenderFormat::Json) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      arr.push_back({{"prototype_id", r.prototype_id},
                     {"aligned_sentence", r.aligned_sentence},
                     {"class_weight", r.class_weight},
                     {"polarity", std::string(1, r.polarity())}});
    }
    return arr.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "proto  polarity  weight   aligned sentence\n";
  for (const auto& r : rows) {
    char head[64];
    std::snprintf(head, sizeof(head), "P%-5zu %-9c %-8s ", r.prototype_id, r.polarity(), fixed(r.class_weight, 3).c_str());
    out << head << r.aligned_sentence << "\n";
  }
  return out.str();
}

}  // namespace protolens

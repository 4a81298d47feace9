// Copyright 2026 The ISAR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <fstream>
#include <sstream>

#include "isar/error.h"
#include "isar/json_util.h"
#include "isar/pipeline.h"

namespace isar::pipeline {
namespace {

using ojson = nlohmann::ordered_json;

std::string Num(const ojson& v, const char* fmt = "%.4f") {
  if (v.is_null()) return "null";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v.get<double>());
  return buf;
}

std::string Str(const ojson& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

// Pipe-delimited table, columns padded to their widest cell.
std::string Table(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& row) {
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& row) {
    out << "|";
    for (size_t c = 0; c < row.size(); ++c) {
      out << " " << row[c] << std::string(width[c] - row[c].size(), ' ') << " |";
    }
    out << "\n";
  };
  line(header);
  out << "|";
  for (size_t w : width) out << std::string(w + 2, '-') << "|";
  out << "\n";
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string RenderText(const ojson& r) {
  std::ostringstream out;
  out << "ISAR report (" << Str(r.at("format")) << ", tool "
      << Str(r.at("tool_version")) << ")\n\n";
  const ojson& ds = r.at("dataset");
  out << "Dataset: " << Str(ds.at("source")) << ", " << ds.at("n_rows") << " rows, "
      << ds.at("n_positive") << " in the high class (median "
      << Num(ds.at("median_threshold"), "%.6g") << ")\n";
  out << "Removed features:";
  for (const auto& f : ds.at("removed_features")) out << " " << Str(f);
  if (ds.at("removed_features").empty()) out << " none";
  out << "\n\n";

  out << "Split metrics\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : r.at("splits")) {
    rows.push_back({Num(s.at("seed")), Num(s.at("cv").at("auroc")),
                    Num(s.at("train").at("auroc")), Num(s.at("test").at("auroc")),
                    Num(s.at("test").at("f1_weighted")),
                    Num(s.at("test").at("accuracy"))});
  }
  const ojson& agg = r.at("aggregate");
  rows.push_back({"mean", Num(agg.at("cv").at("auroc")), Num(agg.at("train").at("auroc")),
                  Num(agg.at("test").at("auroc")), Num(agg.at("test").at("f1_weighted")),
                  Num(agg.at("test").at("accuracy"))});
  out << Table({"seed", "cv_auroc", "train_auroc", "test_auroc", "test_f1", "test_acc"},
               rows)
      << "\n";

  out << "Importance ranks (1 = most important)\n";
  std::vector<std::string> header = {"seed", "method"};
  for (const auto& f : r.at("ranks").at("features")) header.push_back(Str(f));
  rows.clear();
  for (const auto& s : r.at("splits")) {
    for (const char* m : {"gain", "permutation", "shap"}) {
      std::vector<std::string> row = {Num(s.at("seed")), m};
      for (const auto& k : s.at("importances").at(m).at("ranks")) row.push_back(Num(k));
      rows.push_back(std::move(row));
    }
  }
  std::vector<std::string> avg = {"all", "average"};
  for (const auto& a : r.at("ranks").at("average_rank")) avg.push_back(Num(a, "%.2f"));
  rows.push_back(std::move(avg));
  out << Table(header, rows) << "\n";

  out << "Reference split: seed " << r.at("reference").at("seed").dump() << "\n";
  out << "Top features:";
  for (const auto& f : r.at("ranks").at("top_k")) out << " " << Str(f);
  out << "\n\n";

  const ojson& cart = r.at("cart");
  out << "Decision tree: depth " << cart.at("depth") << ", " << cart.at("leaves")
      << " leaves, test AUROC " << Num(cart.at("test").at("auroc")) << "\n\n";

  const ojson& rf = r.at("rulefit");
  out << "RuleFit: " << rf.at("n_nonzero") << " nonzero terms of "
      << rf.at("n_rules") << " rules, test AUROC " << Num(rf.at("test").at("auroc"))
      << "\n";
  rows.clear();
  int index = 1;
  for (const auto& rule : rf.at("rules")) {
    rows.push_back({std::to_string(index++), Str(rule.at("rule")),
                    Num(rule.at("coefficient")), Num(rule.at("support"), "%.3f"),
                    Num(rule.at("importance"))});
  }
  out << Table({"#", "rule", "coef", "support", "importance"}, rows) << "\n";

  const ojson& local = r.at("local");
  out << "Local explanation, row " << local.at("row_id") << ": class "
      << local.at("predicted_class") << ", probability "
      << Num(local.at("probability")) << ", " << local.at("positive_count")
      << " of " << local.at("push").size() << " features push toward the high class\n";
  return out.str();
}

std::string HtmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string RenderHtml(const ojson& r) {
  std::string data = r.dump();
  // Keep the payload from closing its script element.
  for (size_t p = data.find("</"); p != std::string::npos; p = data.find("</", p + 3)) {
    data.replace(p, 2, "<\\/");
  }
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
      << "<title>ISAR report</title>\n</head>\n<body>\n<pre>\n"
      << HtmlEscape(RenderText(r)) << "</pre>\n"
      << "<script type=\"application/json\" id=\"isar-report\">" << data
      << "</script>\n</body>\n</html>\n";
  return out.str();
}

}  // namespace

std::string CanonicalReportHash(const ojson& report) {
  ojson copy = report;
  copy.erase("generated_at");
  return Sha256Hex(copy.dump());
}

ojson LoadReport(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "cannot read " + path.string());
  ojson report;
  try {
    report = ojson::parse(in);
  } catch (const ojson::parse_error& e) {
    throw Error(ErrorKind::kData, path.string() + " is not valid JSON: " + e.what());
  }
  if (!report.is_object() || report.value("format", "") != kReportFormat) {
    throw Error(ErrorKind::kData,
                path.string() + " is not an " + std::string(kReportFormat) + " report");
  }
  return report;
}

RenderFormat ParseRenderFormat(const std::string& name) {
  if (name == "json") return RenderFormat::kJson;
  if (name == "text") return RenderFormat::kText;
  if (name == "html-static") return RenderFormat::kHtmlStatic;
  throw Error(ErrorKind::kConfig, "unknown render format " + name, "format");
}

std::string RenderReport(const ojson& report, RenderFormat format) {
  try {
    switch (format) {
      case RenderFormat::kJson: return report.dump(2) + "\n";
      case RenderFormat::kText: return RenderText(report);
      case RenderFormat::kHtmlStatic: return RenderHtml(report);
    }
  } catch (const ojson::exception& e) {
    throw Error(ErrorKind::kData, std::string("report is incomplete: ") + e.what());
  }
  throw Error(ErrorKind::kConfig, "unknown render format", "format");
}

}  // namespace isar::pipeline

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rieszstop/error.hpp"

namespace rieszstop::docsmap {

struct PaperAnchor {
  std::string label;
  std::string quote;
  std::string target;  ///< module.operation
};

struct Marker {
  std::string target;
  std::string file;
  int line = 0;
};

struct ManifestReport {
  std::vector<PaperAnchor> anchors;
  std::vector<Marker> markers;
  std::vector<std::string> out_of_scope;
  std::vector<std::string> missing_in_code;    ///< manifest targets with no marker
  std::vector<std::string> unmapped_markers;   ///< markers no anchor points to
  std::vector<std::string> duplicate_targets;  ///< targets named by several anchors
  std::vector<std::string> duplicate_markers;  ///< targets marked more than once
  std::vector<std::string> malformed;          ///< anchors with empty fields or bad targets

  bool pass() const {
    return missing_in_code.empty() && unmapped_markers.empty() && duplicate_targets.empty() &&
           duplicate_markers.empty() && malformed.empty() && !anchors.empty();
  }

  std::string diff() const {
    std::ostringstream os;
    auto list = [&](const char* what, const std::vector<std::string>& v) {
      for (const auto& s : v) os << what << ": " << s << '\n';
    };
    list("missing marker", missing_in_code);
    list("unmapped marker", unmapped_markers);
    list("duplicate anchor target", duplicate_targets);
    list("duplicate marker", duplicate_markers);
    list("malformed anchor", malformed);
    return os.str();
  }
};

inline std::vector<PaperAnchor> load_manifest(const std::string& text, std::vector<std::string>* out_of_scope = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("manifest: ") + e.what());
  }
  if (!j.contains("anchors") || !j["anchors"].is_array()) throw config_error("manifest: missing anchors array");
  std::vector<PaperAnchor> out;
  for (const auto& a : j["anchors"]) {
    PaperAnchor p;
    p.label = a.value("label", "");
    p.quote = a.value("quote", "");
    p.target = a.value("target", "");
    out.push_back(std::move(p));
  }
  if (out_of_scope && j.contains("out_of_scope"))
    for (const auto& s : j["out_of_scope"]) out_of_scope->push_back(s.get<std::string>());
  return out;
}

/// Lines starting with `// anchor: <module>.<operation>` in C++ sources under the given roots.
inline std::vector<Marker> scan_markers(const std::vector<std::filesystem::path>& roots) {
  static const std::regex re(R"(^\s*//\s*anchor:\s*([A-Za-z0-9_]+\.[A-Za-z0-9_]+))");
  std::vector<Marker> out;
  for (const auto& root : roots) {
    if (!std::filesystem::exists(root)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".hpp" || ext == ".cpp" || ext == ".h")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f);
      std::string line;
      int n = 0;
      while (std::getline(in, line)) {
        ++n;
        std::smatch m;
        if (std::regex_search(line, m, re)) out.push_back({m[1].str(), f.string(), n});
      }
    }
  }
  return out;
}

/// Compares anchors with markers; the manifest is consistent when every anchor
/// target is marked exactly once in the sources and every marker is named by
/// exactly one anchor.
inline ManifestReport compare(std::vector<PaperAnchor> anchors, std::vector<Marker> markers) {
  static const std::set<std::string> modules{"model",  "special", "kernels", "riesz", "perpetual",
                                             "invest2d", "amput", "verify",  "cli",   "docsmap"};
  ManifestReport rep;
  std::map<std::string, int> anchor_count, marker_count;
  for (const auto& a : anchors) {
    const auto dot = a.target.find('.');
    if (a.label.empty() || a.quote.empty() || dot == std::string::npos ||
        !modules.count(a.target.substr(0, dot)))
      rep.malformed.push_back(a.label + " -> " + a.target);
    ++anchor_count[a.target];
  }
  for (const auto& m : markers) ++marker_count[m.target];
  for (const auto& [t, n] : anchor_count) {
    if (n > 1) rep.duplicate_targets.push_back(t);
    if (!marker_count.count(t)) rep.missing_in_code.push_back(t);
  }
  for (const auto& [t, n] : marker_count) {
    if (n > 1) rep.duplicate_markers.push_back(t);
    if (!anchor_count.count(t)) rep.unmapped_markers.push_back(t);
  }
  rep.anchors = std::move(anchors);
  rep.markers = std::move(markers);
  return rep;
}

inline ManifestReport check_manifest(const std::filesystem::path& manifest,
                                     const std::vector<std::filesystem::path>& source_roots) {
  std::ifstream in(manifest);
  if (!in) throw config_error("manifest: cannot open " + manifest.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::vector<std::string> oos;
  auto anchors = load_manifest(ss.str(), &oos);
  auto rep = compare(std::move(anchors), scan_markers(source_roots));
  rep.out_of_scope = std::move(oos);
  return rep;
}

}  // namespace rieszstop::docsmap

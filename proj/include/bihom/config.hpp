#pragma once

// Job configurations.  A job is a JSON object with exactly the fields
//   { n1, n2, forms: [string], task: string, params: object }
// (forms and params may be omitted; unknown fields are rejected).  Task
// settings — grids, moduli, sample counts, seed, output path, worker count —
// live inside params so that one document describes one reproducible run.

#include "bihom/forms.hpp"
#include "bihom/parser.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bihom {

using Json = nlohmann::json;

// Configuration problems carry the offending field so error text can name it.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string f, const std::string& msg)
      : std::runtime_error(f.empty() ? msg : f + ": " + msg), field(std::move(f)) {}
};

struct JobConfig {
  int n1 = 0;
  int n2 = 0;
  std::vector<std::string> forms;
  std::string task;
  Json params = Json::object();

  // Canonical document (nlohmann objects iterate in sorted key order).
  Json to_json() const {
    Json doc = Json::object();
    doc["n1"] = n1;
    doc["n2"] = n2;
    doc["forms"] = forms;
    doc["task"] = task;
    doc["params"] = params;
    return doc;
  }
};

namespace detail {

inline long long require_int_field(const Json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ConfigError(key, "required field is missing");
  const Json& v = doc.at(key);
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<long long>();
}

}  // namespace detail

inline JobConfig job_from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("", "job configuration must be a JSON object");
  static const char* const kKnown[] = {"n1", "n2", "forms", "task", "params"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const char* k : kKnown) known = known || (it.key() == k);
    if (!known) throw ConfigError(it.key(), "unknown field");
  }

  JobConfig job;
  long long n1 = detail::require_int_field(doc, "n1");
  long long n2 = detail::require_int_field(doc, "n2");
  if (n1 < 1 || n1 > 1'000'000) throw ConfigError("n1", "must lie in [1, 1000000]");
  if (n2 < 1 || n2 > 1'000'000) throw ConfigError("n2", "must lie in [1, 1000000]");
  job.n1 = static_cast<int>(n1);
  job.n2 = static_cast<int>(n2);

  if (!doc.contains("task")) throw ConfigError("task", "required field is missing");
  if (!doc.at("task").is_string()) throw ConfigError("task", "expected a string");
  job.task = doc.at("task").get<std::string>();
  if (job.task.empty()) throw ConfigError("task", "must not be empty");

  if (doc.contains("forms")) {
    const Json& fs = doc.at("forms");
    if (!fs.is_array()) throw ConfigError("forms", "expected an array of strings");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      if (!fs[i].is_string())
        throw ConfigError("forms[" + std::to_string(i) + "]", "expected a string");
      job.forms.push_back(fs[i].get<std::string>());
    }
  }

  if (doc.contains("params")) {
    if (!doc.at("params").is_object()) throw ConfigError("params", "expected an object");
    job.params = doc.at("params");
  }
  return job;
}

inline JobConfig job_from_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // nlohmann's message already carries the byte position.
    throw ConfigError("", e.what());
  }
  return job_from_json(doc);
}

inline JobConfig load_job(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return job_from_text(buf.str());
}

// Parses the form list and, when params declares a bidegree override,
// validates it against the inferred bidegree (inference is the source of
// truth; a mismatched declaration is an error, not a request).
inline FormSystem build_system(const JobConfig& job) {
  if (job.forms.empty()) throw ConfigError("forms", "this task needs at least one form");
  FormSystem sys = parse_system(job.forms, job.n1, job.n2);
  if (job.params.contains("d1")) {
    const Json& v = job.params.at("d1");
    if (!v.is_number_integer()) throw ConfigError("params.d1", "expected an integer");
    if (v.get<long long>() != sys.d1())
      throw ConfigError("params.d1", "declared x-degree " + v.dump() +
                                         " does not match inferred " +
                                         std::to_string(sys.d1()));
  }
  if (job.params.contains("d2")) {
    const Json& v = job.params.at("d2");
    if (!v.is_number_integer()) throw ConfigError("params.d2", "expected an integer");
    if (v.get<long long>() != sys.d2())
      throw ConfigError("params.d2", "declared y-degree " + v.dump() +
                                         " does not match inferred " +
                                         std::to_string(sys.d2()));
  }
  return sys;
}

// ---------------------------------------------------------------------------
// typed parameter accessors (errors name params.<key>)

inline bool has_param(const JobConfig& job, const std::string& key) {
  return job.params.contains(key);
}

inline long long param_int(const JobConfig& job, const std::string& key, long long def) {
  if (!job.params.contains(key)) return def;
  const Json& v = job.params.at(key);
  if (!v.is_number_integer()) throw ConfigError("params." + key, "expected an integer");
  return v.get<long long>();
}

inline double param_double(const JobConfig& job, const std::string& key, double def) {
  if (!job.params.contains(key)) return def;
  const Json& v = job.params.at(key);
  if (!v.is_number()) throw ConfigError("params." + key, "expected a number");
  return v.get<double>();
}

inline std::string param_string(const JobConfig& job, const std::string& key,
                                const std::string& def) {
  if (!job.params.contains(key)) return def;
  const Json& v = job.params.at(key);
  if (!v.is_string()) throw ConfigError("params." + key, "expected a string");
  return v.get<std::string>();
}

inline bool param_bool(const JobConfig& job, const std::string& key, bool def) {
  if (!job.params.contains(key)) return def;
  const Json& v = job.params.at(key);
  if (!v.is_boolean()) throw ConfigError("params." + key, "expected a boolean");
  return v.get<bool>();
}

inline std::vector<long long> param_int_list(const JobConfig& job, const std::string& key,
                                             std::vector<long long> def = {}) {
  if (!job.params.contains(key)) return def;
  const Json& v = job.params.at(key);
  if (!v.is_array()) throw ConfigError("params." + key, "expected an array of integers");
  std::vector<long long> out;
  for (const Json& e : v) {
    if (!e.is_number_integer())
      throw ConfigError("params." + key, "expected an array of integers");
    out.push_back(e.get<long long>());
  }
  return out;
}

inline std::vector<double> param_double_list(const JobConfig& job, const std::string& key,
                                             std::vector<double> def = {}) {
  if (!job.params.contains(key)) return def;
  const Json& v = job.params.at(key);
  if (!v.is_array()) throw ConfigError("params." + key, "expected an array of numbers");
  std::vector<double> out;
  for (const Json& e : v) {
    if (!e.is_number()) throw ConfigError("params." + key, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// config hash

// FNV-1a (64-bit) over the canonical dump.  Worker count and output path do
// not change any computed number, so they are excluded: the same data-bearing
// config hashes identically at any parallelism.
inline std::string config_hash(const JobConfig& job) {
  Json doc = job.to_json();
  doc["params"].erase("workers");
  doc["params"].erase("out");
  std::string s = doc.dump();
  unsigned long long h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace bihom

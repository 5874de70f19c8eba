#pragma once

#include <stdexcept>
#include <string>

namespace groundgap {

// Every failure surfaced by the library carries a short category tag so the
// CLI can print a single machine-parseable line: "error[<category>]: <what>".
class Error : public std::runtime_error {
public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

private:
  std::string category_;
};

class CorpusError : public Error {
public:
  explicit CorpusError(const std::string& message) : Error("corpus", message) {}
};

class TemplateError : public Error {
public:
  explicit TemplateError(const std::string& message) : Error("template", message) {}
};

class BackendError : public Error {
public:
  // status is the HTTP status when one was received, 0 for transport failures.
  BackendError(const std::string& message, int status = 0, bool retryable = false)
      : Error("backend", message), status_(status), retryable_(retryable) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

private:
  int status_;
  bool retryable_;
};

class ClassificationError : public Error {
public:
  ClassificationError(const std::string& message, std::string raw_text)
      : Error("classify", message), raw_text_(std::move(raw_text)) {}

  const std::string& raw_text() const noexcept { return raw_text_; }

private:
  std::string raw_text_;
};

class LabelParseError : public Error {
public:
  explicit LabelParseError(const std::string& message) : Error("label", message) {}
};

class SimulationError : public Error {
public:
  explicit SimulationError(const std::string& message) : Error("simulate", message) {}
};

class MetricsError : public Error {
public:
  explicit MetricsError(const std::string& message) : Error("metrics", message) {}
};

class AnnotationError : public Error {
public:
  explicit AnnotationError(const std::string& message) : Error("annotate", message) {}
};

class ReportError : public Error {
public:
  explicit ReportError(const std::string& message) : Error("report", message) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

}  // namespace groundgap

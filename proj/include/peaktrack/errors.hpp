#ifndef PEAKTRACK_ERRORS_HPP
#define PEAKTRACK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pt {

// Data-level failure (bad file, inconsistent inputs). Carries a stable
// machine-readable code alongside the human message; the CLI maps these
// to exit code 2.
class DataError : public std::runtime_error {
public:
  DataError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

private:
  std::string code_;
};

// File parsing failure with the offending path baked into the message.
class ParseError : public DataError {
public:
  ParseError(std::string code, const std::string& path, const std::string& detail)
      : DataError(std::move(code), path + ": " + detail), path_(path) {}

  const std::string& path() const { return path_; }

private:
  std::string path_;
};

} // namespace pt

#endif

#pragma once

#include <stdexcept>
#include <string>

#include "metabug/minilang/ast.hpp"

namespace metabug::minilang {

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(SourceLoc loc, const std::string& msg)
      : std::runtime_error(std::to_string(loc.line) + ":" + std::to_string(loc.column) +
                           ": syntax error: " + msg),
        loc_(loc) {}
  SourceLoc where() const { return loc_; }

 private:
  SourceLoc loc_;
};

class ResolutionError : public std::runtime_error {
 public:
  ResolutionError(SourceLoc loc, std::string name, const std::string& msg)
      : std::runtime_error(std::to_string(loc.line) + ":" + std::to_string(loc.column) +
                           ": " + msg + " '" + name + "'"),
        loc_(loc),
        name_(std::move(name)) {}
  SourceLoc where() const { return loc_; }
  const std::string& name() const { return name_; }

 private:
  SourceLoc loc_;
  std::string name_;
};

}  // namespace metabug::minilang

#pragma once

#include <stdexcept>
#include <string>

namespace gov2vec {

// Base of every data error raised by the library. The CLI maps these to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class EmptyVocabulary : public Error {
 public:
  EmptyVocabulary() : Error("no word reaches the minimum count") {}
};

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("corpus contains no trainable documents") {}
};

class UnknownWord : public Error {
 public:
  explicit UnknownWord(const std::string& word) : Error("unknown word: " + word) {}
};

class UnknownIdentifier : public Error {
 public:
  explicit UnknownIdentifier(const std::string& id)
      : Error("unknown identifier: " + id), identifier_(id) {}
  const std::string& identifier() const noexcept { return identifier_; }

 private:
  std::string identifier_;
};

class ZeroVector : public Error {
 public:
  ZeroVector() : Error("cosine of a zero vector is undefined") {}
};

class DegenerateQuery : public Error {
 public:
  DegenerateQuery() : Error("query terms cancel to the zero vector") {}
};

class DegenerateData : public Error {
 public:
  DegenerateData() : Error("input vectors have zero variance") {}
};

class ConstantSeries : public Error {
 public:
  ConstantSeries() : Error("series has zero rank variance") {}
};

}  // namespace gov2vec

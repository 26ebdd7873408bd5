#pragma once

#include <stdexcept>
#include <string>

namespace dar {

// Precondition violated by the caller (bad node count, bad family, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class GenerationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// API misuse that is not a plain bad argument: non-scalar loss, updating a
// frozen tensor, non-antisymmetric flow handed to the conservation report.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class InvalidFlow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CorrectionFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dar

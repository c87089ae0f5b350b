#pragma once

#include <stdexcept>
#include <string>

namespace gridrag {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FileNotFound : Error {
    explicit FileNotFound(const std::string& path) : Error("file not found: " + path) {}
};

struct MalformedWorkbook : Error {
    explicit MalformedWorkbook(const std::string& detail) : Error("malformed workbook: " + detail) {}
};

struct UnsupportedFormat : Error {
    explicit UnsupportedFormat(const std::string& what) : Error("unsupported format: " + what) {}
};

struct InvalidCoordinate : Error {
    explicit InvalidCoordinate(const std::string& what) : Error("invalid coordinate: " + what) {}
};

struct ChunkTooLarge : Error {
    explicit ChunkTooLarge(const std::string& what) : Error("chunk too large: " + what) {}
};

struct DuplicateChunkId : Error {
    explicit DuplicateChunkId(const std::string& id) : Error("duplicate chunk id: " + id) {}
};

struct EmbedderFailure : Error {
    std::string chunk_id;
    EmbedderFailure(std::string chunk, const std::string& cause)
        : Error("embedder failure on " + chunk + ": " + cause), chunk_id(std::move(chunk)) {}
};

struct IncompatibleVersion : Error {
    explicit IncompatibleVersion(const std::string& what) : Error("incompatible version: " + what) {}
};

struct CorruptIndex : Error {
    explicit CorruptIndex(const std::string& what) : Error("corrupt index: " + what) {}
};

struct BackendFailure : Error {
    explicit BackendFailure(const std::string& cause) : Error("backend failure: " + cause) {}
};

struct PlanInvalid : Error {
    explicit PlanInvalid(const std::string& details) : Error("invalid plan: " + details) {}
};

struct UnknownExecutorType : Error {
    explicit UnknownExecutorType(const std::string& t) : Error("unknown executor type: " + t) {}
};

struct SheetNotFound : Error {
    explicit SheetNotFound(const std::string& name) : Error("sheet not found: " + name) {}
};

struct BadRange : Error {
    explicit BadRange(const std::string& r) : Error("bad range: " + r) {}
};

struct WriteConflict : Error {
    explicit WriteConflict(const std::string& path) : Error("write conflict (lock held): " + path) {}
};

struct EvalError : Error {
    explicit EvalError(const std::string& what) : Error("formula eval error: " + what) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error("parse error: " + what) {}
};

struct UnknownFunction : Error {
    explicit UnknownFunction(const std::string& name) : Error("unknown function: " + name) {}
};

struct CycleDetected : Error {
    explicit CycleDetected(const std::string& at) : Error("reference cycle at " + at) {}
};

struct NonNumericCell : Error {
    explicit NonNumericCell(const std::string& ref) : Error("non-numeric cell: " + ref) {}
};

struct ImageNotFound : Error {
    explicit ImageNotFound(const std::string& id) : Error("image not found: " + id) {}
};

struct EmptyRelevantSet : Error {
    EmptyRelevantSet() : Error("relevant set is empty") {}
};

struct UnresolvedLabel : Error {
    UnresolvedLabel(const std::string& query_id, const std::string& chunk_id)
        : Error("query " + query_id + " references unindexed chunk " + chunk_id) {}
};

}  // namespace gridrag

#pragma once

#include <stdexcept>
#include <string>

namespace robinhom {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// cellmesh
class HoleTooLarge : public Error { public: using Error::Error; };
class MeshQualityError : public Error { public: using Error::Error; };
class MeshGlueError : public Error { public: using Error::Error; };
class MeshMismatch : public Error { public: using Error::Error; };

// assembly
class AssemblyError : public Error { public: using Error::Error; };
class LoadError : public Error { public: using Error::Error; };

// numkernel
class NoConvergence : public Error { public: using Error::Error; };
class ZeroPencil : public Error { public: using Error::Error; };
class IndefiniteBreakdown : public Error { public: using Error::Error; };

// cellspec
class WrongBranch : public Error { public: using Error::Error; };

// exterior / strangeterm
class ConstraintInfeasible : public Error { public: using Error::Error; };
class BracketFailure : public Error { public: using Error::Error; };

/// Invalid argument or violated precondition.
class PreconditionError : public Error { public: using Error::Error; };

} // namespace robinhom

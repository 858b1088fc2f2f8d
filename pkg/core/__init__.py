# Core package for the trip HMM toolkit

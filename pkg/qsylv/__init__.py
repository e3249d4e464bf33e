# Quaternion Sylvester-chain solver package

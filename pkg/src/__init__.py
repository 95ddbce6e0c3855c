# real-moduli package
